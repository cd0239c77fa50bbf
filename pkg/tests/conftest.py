from __future__ import annotations

import functools
import sys

import pytest
from hypothesis import HealthCheck, settings

from rigkit.auditlog import AuditEvent, parse_text
from rigkit.syscalls import load_syscall_table
from rigkit.synth import ScenarioSpec, SynthLog, generate

settings.register_profile(
    "rigkit", max_examples=60, deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("rigkit")

# The sample escape event in the abbreviated layout: indented
# continuation, header-less follow-up records.
ESCAPE = """\
type=SYSCALL msg=audit(1632851805.333:76118):
    syscall=59 ppid=12261 pid=12272 uid=0 comm="escape.sh" exe="/bin/busybox"
type=EXECVE: argc=2 a0="/bin/sh" a1="/escape.sh"
type=CWD: cwd="/privesc"
type=PATH: name="/escape.sh" inode=667188
type=PATH: name="/bin/sh" inode=65711
type=PATH: name="/lib/ld-musl-x86_64.so.1" inode=65873
type=PROCTITLE: proctitle=72756E6300696E6974
"""

# The same event as auditd actually writes it.
ESCAPE_RAW = """\
type=SYSCALL msg=audit(1632851805.333:76118): arch=c000003e syscall=59 success=yes exit=0 a0=55d4 a1=55d5 a2=55d6 a3=0 items=3 ppid=12261 pid=12272 auid=4294967295 uid=0 gid=0 euid=0 suid=0 fsuid=0 egid=0 sgid=0 fsgid=0 tty=(none) ses=4294967295 comm="escape.sh" exe="/bin/busybox" key=(null)
type=EXECVE msg=audit(1632851805.333:76118): argc=2 a0="/bin/sh" a1="/escape.sh"
type=CWD msg=audit(1632851805.333:76118): cwd="/privesc"
type=PATH msg=audit(1632851805.333:76118): item=0 name="/escape.sh" inode=667188 dev=00:2f mode=0100755 ouid=0 ogid=0 rdev=00:00 nametype=NORMAL
type=PATH msg=audit(1632851805.333:76118): item=1 name="/bin/sh" inode=65711 dev=00:2f mode=0100755 ouid=0 ogid=0 rdev=00:00 nametype=NORMAL
type=PATH msg=audit(1632851805.333:76118): item=2 name="/lib/ld-musl-x86_64.so.1" inode=65873 dev=00:2f mode=0100755 ouid=0 ogid=0 rdev=00:00 nametype=NORMAL
type=PROCTITLE msg=audit(1632851805.333:76118): proctitle=72756E6300696E6974
type=EOE msg=audit(1632851805.333:76118):
"""

ESCAPE_TS = 1632851805.333


@pytest.fixture(scope="session")
def x64():
    return load_syscall_table("x86-64")


@pytest.fixture
def escape_event() -> AuditEvent:
    events, stats = parse_text(ESCAPE)
    assert len(events) == 1 and not stats.warnings
    return events[0]


def ev(t: float, syscall: int, pid: str, exe: str, uid: str = "0", ppid: str | None = None,
       paths: tuple[str, ...] = (), args: tuple[str, ...] = (), sockaddr: str | None = None,
       cwd: str | None = None, serial: int = 0) -> AuditEvent:
    """Compact event constructor for hand-built logs."""
    return AuditEvent(
        timestamp=t, serial=serial, syscall=syscall, pid=pid, ppid=ppid, uid=uid, exe=exe,
        paths=[(p, None) for p in paths], execve_args=list(args), cwd=cwd,
        sockaddr=("inet", sockaddr) if sockaddr else None,
    )


@functools.lru_cache(maxsize=None)
def synth_log(seed: int, attack: str = "none", duration: float = 900.0) -> SynthLog:
    return generate(ScenarioSpec(attack=attack, seed=seed, duration=duration))


@functools.lru_cache(maxsize=None)
def synth_events(seed: int, attack: str = "none", duration: float = 900.0) -> tuple[AuditEvent, ...]:
    events, _ = parse_text(synth_log(seed, attack, duration).text)
    return tuple(events)


def pytest_terminal_summary(terminalreporter):
    acceptance = sys.modules.get("test_acceptance")
    if acceptance is None or not acceptance.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for _, line in sorted(acceptance.RESULTS.items()):
        terminalreporter.write_line(line)
