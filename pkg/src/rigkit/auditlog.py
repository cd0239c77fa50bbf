"""Parse raw auditd text logs into syscall events.

auditd writes one record per line::

    type=SYSCALL msg=audit(1632851805.333:76118): arch=c000003e syscall=59 ...
    type=EXECVE msg=audit(1632851805.333:76118): argc=2 a0="/bin/sh" ...

Records sharing the ``audit(seconds.millis:serial)`` key form one event. Only
events that contain a SYSCALL record are emitted; the rest are counted.

The abbreviated layout used in write-ups is accepted as well: indented
continuation lines extend the previous record, and a header-less ``type=T:``
record attaches to the most recently opened event.
"""

from __future__ import annotations

import binascii
import ipaddress
import json
import logging
import re
import struct
from collections import OrderedDict
from collections.abc import Iterable, Iterator, Mapping
from dataclasses import dataclass, field
from typing import TextIO

from .syscalls import SyscallTable

log = logging.getLogger(__name__)

OPEN_EVENT_LIMIT = 1024

_HEADER = re.compile(
    r"^(?:node=\S+\s+)?type=(?P<type>[A-Z_0-9]+)\s+msg=audit\((?P<sec>\d+)\.(?P<ms>\d+):(?P<serial>\d+)\):\s*(?P<body>.*)$"
)
_SHORT_HEADER = re.compile(r"^type=(?P<type>[A-Z_0-9]+):\s*(?P<body>.*)$")
_KV = re.compile(r"""([A-Za-z_][\w\[\]]*)=("[^"]*"|'[^']*'|\S*)""")
_EXECVE_ARG = re.compile(r"^a(\d+)(?:\[(\d+)\])?$")
_HEX = re.compile(r"^(?:[0-9A-Fa-f]{2})+$")

# Keys whose unquoted values auditd hex-encodes.
_STRING_KEYS = {"name", "exe", "cwd", "comm", "proctitle"}

RECORD_TYPES = ("SYSCALL", "EXECVE", "CWD", "PATH", "SOCKADDR", "PROCTITLE")

AF_UNIX = 1
AF_INET = 2
AF_INET6 = 10


@dataclass
class AuditRecord:
    record_type: str
    event_key: tuple[str, int]
    kv: dict[str, str]
    raw_kv: dict[str, str] = field(default_factory=dict, repr=False)


@dataclass
class AuditEvent:
    timestamp: float
    serial: int
    syscall: int
    pid: str | None = None
    ppid: str | None = None
    uid: str | None = None
    exe: str | None = None
    paths: list[tuple[str, int | None]] = field(default_factory=list)
    cwd: str | None = None
    execve_args: list[str] = field(default_factory=list)
    sockaddr: tuple[str, str] | None = None
    comm: str | None = None
    success: str | None = None

    def to_dict(self) -> dict:
        """Stable-order dict used by the NDJSON dump."""
        return {
            "timestamp": self.timestamp,
            "serial": self.serial,
            "syscall": self.syscall,
            "pid": self.pid,
            "ppid": self.ppid,
            "uid": self.uid,
            "exe": self.exe,
            "comm": self.comm,
            "success": self.success,
            "cwd": self.cwd,
            "paths": [[n, i] for n, i in self.paths],
            "execve_args": list(self.execve_args),
            "sockaddr": list(self.sockaddr) if self.sockaddr else None,
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> AuditEvent:
        return cls(
            timestamp=d["timestamp"],
            serial=d["serial"],
            syscall=d["syscall"],
            pid=d.get("pid"),
            ppid=d.get("ppid"),
            uid=d.get("uid"),
            exe=d.get("exe"),
            comm=d.get("comm"),
            success=d.get("success"),
            cwd=d.get("cwd"),
            paths=[(n, i) for n, i in d.get("paths", [])],
            execve_args=list(d.get("execve_args", [])),
            sockaddr=tuple(d["sockaddr"]) if d.get("sockaddr") else None,
        )

    def to_lines(self) -> list[str]:
        """Render the event back to auditd records.

        Only the fields the graph builder reads are written; SOCKADDR is
        re-emitted in decoded ``SADDR`` form since the raw bytes are gone.
        """
        head = f"msg=audit({self.timestamp:.3f}:{self.serial}):"
        kv = [f"syscall={self.syscall}"]
        if self.success is not None:
            kv.append(f"success={self.success}")
        for key in ("ppid", "pid", "uid"):
            val = getattr(self, key)
            if val is not None:
                kv.append(f"{key}={val}")
        if self.comm is not None:
            kv.append(f"comm={_quote(self.comm)}")
        if self.exe is not None:
            kv.append(f"exe={_quote(self.exe)}")
        lines = [f"type=SYSCALL {head} " + " ".join(kv)]
        if self.execve_args:
            args = " ".join(f"a{i}={_quote(a)}" for i, a in enumerate(self.execve_args))
            lines.append(f"type=EXECVE {head} argc={len(self.execve_args)} {args}")
        if self.cwd is not None:
            lines.append(f"type=CWD {head} cwd={_quote(self.cwd)}")
        for i, (name, inode) in enumerate(self.paths):
            rec = f"type=PATH {head} item={i} name={_quote(name)}"
            if inode is not None:
                rec += f" inode={inode}"
            lines.append(rec)
        if self.sockaddr is not None:
            lines.append(f"type=SOCKADDR {head} saddr_fam={self.sockaddr[0]} saddr={_quote(self.sockaddr[1])}")
        return lines


def _quote(s: str) -> str:
    """Quote like auditd: plain strings quoted, awkward ones hex-encoded."""
    if s and all(0x21 <= ord(c) < 0x7F and c != '"' for c in s):
        return f'"{s}"'
    return s.encode().hex().upper()


@dataclass
class ParseStats:
    lines: int = 0
    records: int = 0
    events: int = 0
    skipped_events: int = 0
    late_records: int = 0
    distinct_keys: int = 0
    warnings: list[tuple[int, str]] = field(default_factory=list)

    def warn(self, lineno: int, msg: str) -> None:
        self.warnings.append((lineno, msg))
        log.warning("line %d: %s", lineno, msg)


def _unhex(value: str) -> str:
    try:
        return binascii.unhexlify(value).decode("utf-8", errors="replace")
    except (binascii.Error, ValueError):
        return value


def parse_kv(body: str, execve: bool = False) -> tuple[dict[str, str], dict[str, str]]:
    """Split a record body into decoded and raw key/value maps.

    ``execve`` marks an EXECVE body, whose ``aN`` arguments are strings; in
    other records (SYSCALL's ``a0``..``a3``) they are register values.
    """
    # enriched logs append interpreted fields after a GS separator
    body = body.split("\x1d", 1)[0]
    decoded: dict[str, str] = {}
    raw: dict[str, str] = {}
    for key, val in _KV.findall(body):
        raw[key] = val
        if len(val) >= 2 and val[0] == val[-1] and val[0] in "\"'":
            decoded[key] = val[1:-1]
        elif (key in _STRING_KEYS or (execve and _EXECVE_ARG.match(key))) and _HEX.match(val):
            # auditd quotes plain strings, so an unquoted one is always hex
            decoded[key] = _unhex(val)
        else:
            decoded[key] = val
    return decoded, raw


def format_sockaddr(payload: str | bytes | Mapping[str, str]) -> str:
    """Canonical address string for a SOCKADDR record.

    ``payload`` is the ``saddr`` hex string (or its bytes), or a mapping of
    already-interpreted fields (``saddr_fam``/``laddr``/``lport``/``path``).
    """
    if isinstance(payload, Mapping):
        return _format_fields(payload)
    if isinstance(payload, str):
        hexstr = payload.strip().strip('"')
        try:
            data = bytes.fromhex(hexstr)
        except ValueError:
            return f"fam?:{hexstr.lower()}"
    else:
        data = bytes(payload)
    if len(data) < 2:
        return f"fam?:{data.hex()}"
    (family,) = struct.unpack_from("<H", data, 0)
    rest = data[2:]
    if family == AF_INET:
        if len(rest) < 6:
            return f"fam?:{data.hex()}"
        port = struct.unpack_from(">H", rest, 0)[0]
        return f"{ipaddress.IPv4Address(rest[2:6])}:{port}"
    if family == AF_INET6:
        if len(rest) < 22:
            return f"fam?:{data.hex()}"
        port = struct.unpack_from(">H", rest, 0)[0]
        return f"[{ipaddress.IPv6Address(rest[6:22])}]:{port}"
    if family == AF_UNIX:
        if rest[:1] == b"\x00":
            # abstract namespace socket
            return "unix:@" + rest[1:].split(b"\x00", 1)[0].decode("utf-8", "replace")
        return "unix:" + rest.split(b"\x00", 1)[0].decode("utf-8", "replace")
    return f"fam{family}:{rest.hex()}"


def _format_fields(fields: Mapping[str, str]) -> str:
    fam = str(fields.get("saddr_fam", fields.get("family", ""))).lower()
    if fam in ("inet", str(AF_INET)):
        return f"{fields.get('laddr')}:{fields.get('lport')}"
    if fam in ("inet6", str(AF_INET6)):
        return f"[{fields.get('laddr')}]:{fields.get('lport')}"
    if fam in ("local", "unix", str(AF_UNIX)):
        return f"unix:{fields.get('path', '')}"
    return f"fam{fam or '?'}:"


def _family_name(formatted: str) -> str:
    if formatted.startswith("unix:"):
        return "unix"
    if formatted.startswith("fam"):
        return formatted.split(":", 1)[0]
    return "inet6" if formatted.startswith("[") else "inet"


class _OpenEvent:
    __slots__ = ("key", "records", "lineno")

    def __init__(self, key: tuple[str, int], lineno: int) -> None:
        self.key = key
        self.records: list[AuditRecord] = []
        self.lineno = lineno


class AuditParser:
    """Incremental parser; feed lines, then call :meth:`finish`.

    Open events live in an LRU of ``open_limit`` entries; when it overflows
    the oldest event is flushed. Records arriving for an already flushed
    event are dropped and counted in ``stats.late_records``.
    """

    def __init__(self, table: SyscallTable | None = None, open_limit: int = OPEN_EVENT_LIMIT) -> None:
        self.table = table
        self.open_limit = open_limit
        self.stats = ParseStats()
        self._open: OrderedDict[tuple[str, int], _OpenEvent] = OrderedDict()
        self._closed: set[tuple[str, int]] = set()
        self._last_record: AuditRecord | None = None
        self._last_key: tuple[str, int] | None = None

    def feed(self, line: str) -> list[AuditEvent]:
        self.stats.lines += 1
        lineno = self.stats.lines
        line = line.rstrip("\r\n")
        if not line.strip():
            return []
        if line[0].isspace():
            if self._last_record is None:
                self.stats.warn(lineno, "continuation line without a record")
                return []
            decoded, raw = parse_kv(line, self._last_record.record_type == "EXECVE")
            self._last_record.kv.update(decoded)
            self._last_record.raw_kv.update(raw)
            return []

        m = _HEADER.match(line)
        if m:
            key = (f"{m['sec']}.{m['ms']}", int(m["serial"]))
            rtype, body = m["type"], m["body"]
        else:
            s = _SHORT_HEADER.match(line)
            if not s or self._last_key is None or self._last_key not in self._open:
                self.stats.warn(lineno, f"unparseable record header: {line[:80]!r}")
                return []
            key, rtype, body = self._last_key, s["type"], s["body"]

        if key in self._closed:
            self.stats.late_records += 1
            self.stats.warn(lineno, f"record for already flushed event {key}")
            return []
        decoded, raw = parse_kv(body, rtype == "EXECVE")
        rec = AuditRecord(rtype, key, decoded, raw)
        self.stats.records += 1
        self._last_record = rec
        self._last_key = key
        flushed: list[AuditEvent] = []
        ev = self._open.get(key)
        if ev is None:
            ev = self._open[key] = _OpenEvent(key, lineno)
            self.stats.distinct_keys += 1
            if len(self._open) > self.open_limit:
                flushed.extend(self._flush(next(iter(self._open))))
        else:
            self._open.move_to_end(key)
        if rtype == "EOE":
            flushed.extend(self._flush(key))
        else:
            ev.records.append(rec)
        return flushed

    def finish(self) -> list[AuditEvent]:
        out: list[AuditEvent] = []
        while self._open:
            out.extend(self._flush(next(iter(self._open))))
        return out

    def _flush(self, key: tuple[str, int]) -> list[AuditEvent]:
        ev = self._open.pop(key)
        self._closed.add(key)
        if self._last_key == key:
            self._last_record = None
        event = self._assemble(ev)
        if event is None:
            self.stats.skipped_events += 1
            return []
        self.stats.events += 1
        return [event]

    def _assemble(self, ev: _OpenEvent) -> AuditEvent | None:
        syscall_rec = next((r for r in ev.records if r.record_type == "SYSCALL"), None)
        if syscall_rec is None:
            return None
        kv = syscall_rec.kv
        try:
            syscall = int(kv["syscall"])
        except (KeyError, ValueError):
            self.stats.warn(ev.lineno, f"event {ev.key} has no numeric syscall field")
            return None
        if syscall < 0:
            self.stats.warn(ev.lineno, f"event {ev.key} has negative syscall {syscall}")
            return None
        event = AuditEvent(
            timestamp=float(ev.key[0]),
            serial=ev.key[1],
            syscall=syscall,
            pid=kv.get("pid"),
            ppid=kv.get("ppid"),
            uid=kv.get("uid"),
            exe=_nullable(kv.get("exe")),
            comm=_nullable(kv.get("comm")),
            success=kv.get("success"),
        )
        for rec in ev.records:
            if rec.record_type == "PATH":
                name = _nullable(rec.kv.get("name")) or ""
                inode = rec.kv.get("inode")
                event.paths.append((name, int(inode) if inode and inode.isdigit() else None))
            elif rec.record_type == "CWD":
                event.cwd = _nullable(rec.kv.get("cwd"))
            elif rec.record_type == "EXECVE":
                event.execve_args = _execve_args(rec.kv)
            elif rec.record_type == "SOCKADDR":
                if "saddr" in rec.raw_kv and not rec.raw_kv["saddr"].startswith('"'):
                    formatted = format_sockaddr(rec.raw_kv["saddr"])
                elif "saddr" in rec.kv:
                    formatted = rec.kv["saddr"]
                else:
                    formatted = format_sockaddr(rec.kv)
                event.sockaddr = (_family_name(formatted), formatted)
        return event


def _nullable(value: str | None) -> str | None:
    if value is None or value == "(null)":
        return None
    return value


def _execve_args(kv: Mapping[str, str]) -> list[str]:
    parts: dict[int, dict[int, str]] = {}
    for key, val in kv.items():
        m = _EXECVE_ARG.match(key)
        if m:
            chunk = int(m[2]) if m[2] is not None else -1
            parts.setdefault(int(m[1]), {})[chunk] = val
    args = []
    for idx in sorted(parts):
        chunks = parts[idx]
        if -1 in chunks and len(chunks) == 1:
            args.append(chunks[-1])
        else:
            args.append("".join(v for c, v in sorted(chunks.items()) if c >= 0))
    return args


def iter_events(lines: Iterable[str], table: SyscallTable | None = None,
                parser: AuditParser | None = None) -> Iterator[AuditEvent]:
    """Yield events in completion order (not necessarily time order)."""
    parser = parser or AuditParser(table)
    for line in lines:
        yield from parser.feed(line)
    yield from parser.finish()


def parse_stream(lines: Iterable[str] | TextIO, table: SyscallTable | None = None,
                 parser: AuditParser | None = None) -> list[AuditEvent]:
    """Parse a whole log; events come back sorted by (timestamp, serial)."""
    events = list(iter_events(lines, table, parser))
    events.sort(key=lambda e: (e.timestamp, e.serial))
    return events


def parse_text(text: str, table: SyscallTable | None = None) -> tuple[list[AuditEvent], ParseStats]:
    parser = AuditParser(table)
    events = parse_stream(text.splitlines(), table, parser)
    return events, parser.stats


def dump_ndjson(events: Iterable[AuditEvent], out: TextIO) -> None:
    for e in events:
        out.write(json.dumps(e.to_dict()) + "\n")


def load_ndjson(lines: Iterable[str]) -> list[AuditEvent]:
    return [AuditEvent.from_dict(json.loads(l)) for l in lines if l.strip()]
