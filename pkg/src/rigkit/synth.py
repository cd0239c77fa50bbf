"""Desk-scale synthetic auditd logs with labelled attack windows.

A scenario is a set of background *profiles* (a user running one executable
against a fixed pool of files and sockets) plus an optional attack injected
at ``attack_start``. Background resources are drawn from small pools, so
after a warm-up almost every background interaction reuses an existing
edge; a profile's ``temp_rate`` adds a trickle of fresh temp files.

Attack templates are structural, not exploit-faithful:

* ``DOS_LIKE``: a container shell mounts a cgroup, plants a release agent,
  and the host-side script fans out into many short processes each flooding
  a fresh file with writes (by default about as many events as the whole
  background);
* ``PRIVESC_LIKE``: a container shell mounts the host disk and rewrites a
  permissions file, after which a host user escalates with sudo.
"""

from __future__ import annotations

import enum
import json
import random
from collections.abc import Sequence
from dataclasses import asdict, dataclass, field
from pathlib import Path

from .labeler import AttackWindow, format_window
from .syscalls import SyscallTable, load_syscall_table

BASE_EPOCH = 1632851000.0


class Attack(enum.Enum):
    NONE = "none"
    DOS_LIKE = "dos"
    PRIVESC_LIKE = "privesc"

    @classmethod
    def parse(cls, value: str | Attack) -> Attack:
        if isinstance(value, Attack):
            return value
        for a in cls:
            if value.lower() in (a.value, a.name.lower()):
                return a
        raise ValueError(f"unknown attack {value!r}; use none, dos or privesc")


# syscall mixes by name; path/socket records are attached per syscall kind
PATH_CALLS = {"openat", "newfstatat", "access", "readlink", "unlink", "mkdir", "chmod",
              "mount", "umount2", "execve", "getdents64", "rename", "truncate", "statfs",
              "utimensat", "chdir"}
SOCKET_CALLS = {"connect", "sendto", "accept4", "bind", "recvfrom"}

# Each workload favours its own path syscalls, as real ones do: a web server
# stats and opens, a database renames and truncates segment files, an editor
# writes a swap file and renames it over the original.
SERVER_MIX = {"read": 4, "write": 3, "openat": 3, "close": 3, "newfstatat": 3,
              "epoll_wait": 3, "accept4": 1, "sendto": 1, "recvfrom": 1}
DB_MIX = {"read": 3, "write": 2, "lseek": 3, "openat": 2, "close": 2, "fsync": 1,
          "rename": 1, "truncate": 1, "unlink": 0.5, "epoll_wait": 2, "sendto": 1,
          "recvfrom": 1}
KV_MIX = {"read": 4, "write": 3, "epoll_wait": 3, "accept4": 1, "openat": 1, "rename": 1,
          "unlink": 1, "fsync": 1, "close": 1}
DAEMON_MIX = {"read": 3, "write": 2, "openat": 2, "close": 2, "newfstatat": 1, "statfs": 1,
              "readlink": 1, "connect": 1, "sendto": 1, "futex": 2, "getdents64": 1}
LOOP_MIX = {"read": 2, "openat": 3, "close": 1, "newfstatat": 1, "write": 1}
SHELL_MIX = {"read": 2, "write": 2, "openat": 2, "access": 2, "newfstatat": 2, "chdir": 1,
             "getdents64": 1, "close": 1}
EDITOR_MIX = {"read": 2, "write": 2, "openat": 2, "rename": 1, "utimensat": 1, "unlink": 1,
              "fsync": 1}


@dataclass
class Profile:
    name: str
    uid: str
    exe: str
    files: list[str]
    sockets: list[str] = field(default_factory=list)
    rate: float = 1.0
    short_lived: bool = False
    mix: dict[str, float] = field(default_factory=lambda: dict(DAEMON_MIX))
    cwd: str = "/"
    argv: list[str] = field(default_factory=list)
    temp_rate: float = 0.0
    temp_prefix: str = "/tmp/tmp."
    # system-wide files (loader cache, libc, /etc lookups) hit with this probability
    shared: list[str] = field(default_factory=list)
    shared_prob: float = 0.0


# a handful of names per directory: enumeration keeps revisiting the same files
RECON_NAMES = ["id_rsa", "config", "backup.tar", "secrets"]

# every dynamically linked program touches some of these
COMMON_FILES = ["/etc/ld.so.cache", "/lib/x86_64-linux-gnu/libc.so.6", "/etc/localtime",
                "/etc/nsswitch.conf", "/etc/passwd", "/etc/group", "/etc/hosts",
                "/dev/null", "/dev/urandom", "/proc/self/status"]


def default_profiles() -> list[Profile]:
    """Four containers, host-side helpers and a logged-in host user.

    Daemons come in master/worker or server/helper pairs that run under
    different users or binaries but work on the same files, and everything
    touches the common system files now and then. In pseudo mode that gives
    most resources more than one accessing process, as in real audit trails.
    """
    html = [f"/usr/share/nginx/html/page{i}.html" for i in range(16)]
    web = ["/etc/nginx/nginx.conf", "/etc/nginx/mime.types", "/var/log/nginx/access.log",
           "/var/log/nginx/error.log"] + html
    redis = ["/data/dump.rdb", "/data/temp-dump.rdb", "/etc/redis/redis.conf",
             "/data/appendonly.aof", "/proc/self/stat", "/proc/self/smaps"]
    pg = [f"/var/lib/postgresql/data/base/16384/{2600 + 7 * i}" for i in range(24)] + [
        "/var/lib/postgresql/data/pg_wal/000000010000000000000001",
        "/var/lib/postgresql/data/postgresql.conf"]
    procfs = ["/proc/loadavg", "/proc/meminfo", "/proc/stat", "/proc/uptime",
              "/proc/net/dev", "/proc/mounts"]
    cgroups = [f"/sys/fs/cgroup/docker/c{i}/{f}" for i in range(4)
               for f in ("memory.stat", "cpu.stat", "pids.current")]
    home = ["/home/user/.bashrc", "/home/user/.bash_history", "/home/user/.profile",
            "/home/user/notes.txt", "/home/user/src/main.c", "/home/user/src/Makefile",
            "/home/user/.viminfo", "/home/user/.cache/motd.legal-displayed"]
    common = dict(shared=list(COMMON_FILES), shared_prob=0.15)
    return [
        Profile("web", "0", "/usr/sbin/nginx", files=list(web),
                sockets=["172.17.0.2:80", "172.17.0.1:45012"],
                rate=0.8, mix=dict(SERVER_MIX), **common),
        Profile("web-worker", "101", "/usr/sbin/nginx", files=list(web),
                sockets=["172.17.0.2:80", "172.17.0.1:45012", "172.17.0.5:5432"],
                rate=1.2, mix=dict(SERVER_MIX), **common,
                temp_rate=0.004, temp_prefix="/var/cache/nginx/client_temp/00000"),
        Profile("cache", "999", "/usr/local/bin/redis-server", files=list(redis),
                sockets=["172.17.0.3:6379"], rate=1.2, mix=dict(KV_MIX), cwd="/data",
                **common),
        Profile("cache-check", "999", "/usr/local/bin/redis-cli", files=list(redis),
                rate=0.4, short_lived=True, mix=dict(LOOP_MIX), cwd="/data",
                argv=["redis-cli", "ping"], **common),
        Profile("db", "70", "/usr/lib/postgresql/14/bin/postgres", files=list(pg),
                sockets=["172.17.0.5:5432", "unix:/var/run/postgresql/.s.PGSQL.5432"],
                rate=1.2, mix=dict(DB_MIX), cwd="/var/lib/postgresql/data", **common),
        Profile("db-archiver", "0", "/usr/lib/postgresql/14/bin/postgres", files=list(pg),
                rate=0.5, mix=dict(DB_MIX), cwd="/var/lib/postgresql/data", **common),
        Profile("monitor", "0", "/bin/busybox", files=procfs + ["/var/run/health"],
                rate=0.5, short_lived=True, mix=dict(LOOP_MIX), cwd="/",
                argv=["/bin/cat", "/proc/loadavg"], **common),
        Profile("runtime", "0", "/usr/bin/containerd",
                files=["/run/containerd/containerd.sock.ttrpc", "/var/lib/containerd/meta.db",
                       "/etc/containerd/config.toml"] + procfs + cgroups,
                sockets=["unix:/run/containerd/containerd.sock"], rate=1.0,
                mix=dict(DAEMON_MIX), **common),
        Profile("login", "1000", "/usr/bin/bash", files=list(home), rate=0.3,
                mix=dict(SHELL_MIX), cwd="/home/user", **common),
        Profile("editor", "1000", "/usr/bin/vim.basic", files=list(home), rate=0.2,
                short_lived=True, mix=dict(EDITOR_MIX), cwd="/home/user",
                argv=["vim", "notes.txt"], **common),
        Profile("cron", "0", "/usr/bin/vcgencmd", files=["/dev/vchiq"] + cgroups[:3],
                rate=0.4, short_lived=True, mix={"openat": 1, "ioctl": 1}, cwd="/root",
                argv=["vcgencmd", "measure_temp"], **common),
    ]


@dataclass
class ScenarioSpec:
    duration: float = 900.0
    profiles: list[Profile] = field(default_factory=default_profiles)
    attack: Attack = Attack.NONE
    # seconds after log start; None picks a random point in [0.3, 0.7] * duration
    attack_start: float | None = None
    seed: int = 0
    table: str = "x86-64"
    noise_rate: float = 0.02
    dos_fanout: int = 60
    # writes per flooding child; the default roughly doubles a log's event count
    dos_writes: int = 100
    # events of post-escalation enumeration; DoS stays about twice as loud
    privesc_recon: int = 3000
    rate_jitter: float = 0.2

    def __post_init__(self) -> None:
        self.attack = Attack.parse(self.attack)
        if self.duration <= 0:
            raise ValueError("duration must be positive")
        if self.attack_start is not None and not 0 <= self.attack_start < self.duration:
            raise ValueError("attack_start must lie in [0, duration)")
        for p in self.profiles:
            if p.rate <= 0:
                raise ValueError(f"profile {p.name}: rate must be positive")

    def to_json(self) -> str:
        d = asdict(self)
        d["attack"] = self.attack.value
        return json.dumps(d, indent=1)

    @classmethod
    def from_json(cls, text: str) -> ScenarioSpec:
        d = json.loads(text)
        if "profiles" in d:
            d["profiles"] = [Profile(**p) for p in d["profiles"]]
        return cls(**d)


@dataclass
class _Ev:
    t: float
    syscall: str
    pid: int
    ppid: int
    uid: str
    exe: str
    comm: str
    paths: list[tuple[str, int]] = field(default_factory=list)
    cwd: str | None = None
    argv: list[str] = field(default_factory=list)
    sockaddr: str | None = None
    attack: bool = False


@dataclass
class SynthLog:
    text: str
    window: AttackWindow | None
    syscall_events: int
    other_events: int
    attack_events: int

    def write(self, out_dir: str | Path, name: str) -> tuple[Path, Path]:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        log_path, win_path = out / f"{name}.log", out / f"{name}.window"
        log_path.write_text(self.text)
        win_path.write_text(format_window(self.window))
        return log_path, win_path


class _Gen:
    def __init__(self, spec: ScenarioSpec, table: SyscallTable) -> None:
        self.spec = spec
        self.table = table
        self.rng = random.Random(spec.seed)
        self.next_pid = self.rng.randrange(12000, 20000)
        self.inodes: dict[str, int] = {}
        self.events: list[_Ev] = []

    def pid(self) -> int:
        self.next_pid += self.rng.randrange(1, 4)
        return self.next_pid

    def inode(self, path: str) -> int:
        if path not in self.inodes:
            self.inodes[path] = self.rng.randrange(10_000, 900_000)
        return self.inodes[path]

    def emit(self, ev: _Ev) -> None:
        ev.paths = [(p, self.inode(p)) for p, _ in ev.paths]
        self.events.append(ev)

    def pick_file(self, prof: Profile) -> str:
        if prof.shared and self.rng.random() < prof.shared_prob:
            return self.rng.choice(prof.shared)
        return self.rng.choice(prof.files)

    def background(self, prof: Profile) -> None:
        rng = self.rng
        rate = prof.rate * (1 + rng.uniform(-self.spec.rate_jitter, self.spec.rate_jitter))
        parent = self.pid()
        main = self.pid()
        comm = Path(prof.exe).name
        names, weights = zip(*prof.mix.items())
        t = rng.expovariate(rate)
        temp_id = rng.randrange(100, 900)
        while t < self.spec.duration:
            if prof.short_lived:
                # spawn, one more call, exit: a fresh pid every time
                child = self.pid()
                argv = prof.argv or [prof.exe]
                self.emit(_Ev(t, "execve", child, parent, prof.uid, prof.exe, comm,
                              paths=[(prof.exe, 0), ("/lib/ld-musl-x86_64.so.1", 0)],
                              cwd=prof.cwd, argv=list(argv)))
                f = self.pick_file(prof)
                sc = rng.choices(names, weights)[0]
                paths = [(f, 0)] if sc in PATH_CALLS else []
                self.emit(_Ev(t + 0.001 * rng.randrange(1, 9), sc, child, parent, prof.uid,
                              prof.exe, comm, paths=paths, cwd=prof.cwd))
            else:
                sc = rng.choices(names, weights)[0]
                ev = _Ev(t, sc, main, parent, prof.uid, prof.exe, comm, cwd=prof.cwd)
                if sc in PATH_CALLS:
                    if prof.temp_rate and rng.random() < prof.temp_rate:
                        temp_id += rng.randrange(1, 5)
                        ev.paths = [(f"{prof.temp_prefix}{temp_id}", 0)]
                    else:
                        ev.paths = [(self.pick_file(prof), 0)]
                if sc in SOCKET_CALLS and prof.sockets:
                    ev.sockaddr = rng.choice(prof.sockets)
                self.emit(ev)
            t += rng.expovariate(rate)

    def attack(self, t0: float) -> None:
        kind = self.spec.attack
        rng = self.rng
        t = t0
        shell_pid, shell_ppid = self.pid(), self.pid()

        def step(sc: str, pid: int, ppid: int, uid: str, exe: str, comm: str, paths=(),
                 argv=(), cwd: str = "/", gap: tuple[float, float] = (0.01, 0.2)) -> None:
            nonlocal t
            self.emit(_Ev(t, sc, pid, ppid, uid, exe, comm, paths=[(p, 0) for p in paths],
                          cwd=cwd, argv=list(argv), attack=True))
            t += rng.uniform(*gap)

        busybox = ("0", "/bin/busybox", "escape.sh")
        if kind is Attack.DOS_LIKE:
            cwd = "/dos"
            step("execve", shell_pid, shell_ppid, *busybox,
                 paths=["/escape.sh", "/bin/sh", "/lib/ld-musl-x86_64.so.1"],
                 argv=["/bin/sh", "/escape.sh"], cwd=cwd)
            for sc, paths in [("mkdir", ["/tmp/cgrp"]), ("mount", ["/tmp/cgrp"]),
                              ("mkdir", ["/tmp/cgrp/x"]),
                              ("openat", ["/tmp/cgrp/x/notify_on_release"]), ("write", []),
                              ("openat", ["/etc/mtab"]), ("read", []),
                              ("openat", ["/tmp/cgrp/release_agent"]), ("write", []),
                              ("openat", ["/cmd"]), ("write", []), ("chmod", ["/cmd"]),
                              ("openat", ["/tmp/cgrp/x/cgroup.procs"]), ("write", [])]:
                step(sc, shell_pid, shell_ppid, *busybox, paths=paths, cwd=cwd)
            host_sh = self.pid()
            host = ("0", "/usr/bin/dash", "sh")
            step("execve", host_sh, 2, *host, paths=["/cmd", "/bin/sh", "/lib/x86_64-linux-gnu/libc.so.6"],
                 argv=["/bin/sh", "/cmd"])
            step("mkdir", host_sh, 2, *host, paths=["/tmp/dos"])
            for i in range(self.spec.dos_fanout):
                step("clone", host_sh, 2, *host, gap=(0.005, 0.05))
                child = self.pid()
                dd = ("0", "/bin/dd", "dd")
                out = f"/tmp/dos/fill_{i}"
                step("execve", child, host_sh, *dd, paths=["/bin/dd", "/lib/x86_64-linux-gnu/libc.so.6"],
                     argv=["/bin/dd", "if=/dev/zero", f"of={out}"], gap=(0.001, 0.01))
                step("openat", child, host_sh, *dd, paths=["/dev/zero"], gap=(0.001, 0.01))
                step("openat", child, host_sh, *dd, paths=[out], gap=(0.001, 0.01))
                for _ in range(self.spec.dos_writes):
                    step("write", child, host_sh, *dd, gap=(0.0005, 0.002))
                step("exit_group", child, host_sh, *dd, gap=(0.001, 0.02))
        elif kind is Attack.PRIVESC_LIKE:
            cwd = "/privesc"
            step("execve", shell_pid, shell_ppid, *busybox,
                 paths=["/escape.sh", "/bin/sh", "/lib/ld-musl-x86_64.so.1"],
                 argv=["/bin/sh", "/escape.sh"], cwd=cwd)
            for sc, paths in [("mkdir", ["/mnt/host"]), ("mount", ["/mnt/host", "/dev/sda1"]),
                              ("openat", ["/mnt/host/etc/sudoers"]), ("write", []),
                              ("chmod", ["/mnt/host/etc/sudoers"]),
                              ("openat", ["/mnt/host/etc/passwd"]), ("read", []),
                              ("umount2", ["/mnt/host"])]:
                step(sc, shell_pid, shell_ppid, *busybox, paths=paths, cwd=cwd)
            sudo = self.pid()
            user = ("1000", "/usr/bin/sudo", "sudo")
            step("execve", sudo, self.pid(), *user, paths=["/usr/bin/sudo", "/lib/x86_64-linux-gnu/libc.so.6"],
                 argv=["sudo", "-s"], cwd="/home/user", gap=(0.5, 2.0))
            for sc, paths in [("openat", ["/etc/sudoers"]), ("read", []),
                              ("openat", ["/etc/shadow"]), ("setuid", [])]:
                step(sc, sudo, sudo - 1, *user, paths=paths, cwd="/home/user")
            self.recon(sudo, t)

    def recon(self, sudo_pid: int, t: float) -> None:
        """A root shell walks the host tree, stats everything, reads some."""
        rng = self.rng
        shell = self.pid()
        root = ("0", "/bin/bash", "bash")
        dirs = ["/etc", "/etc/cron.d", "/etc/ssh", "/root", "/root/.ssh", "/var/backups",
                "/opt", "/usr/local/bin", "/usr/local/sbin", "/var/lib/docker", "/srv"]
        self.emit(_Ev(t, "execve", shell, sudo_pid, *root, paths=[("/bin/bash", 0)],
                      cwd="/root", argv=["/bin/bash"], attack=True))
        n = 1
        while n < self.spec.privesc_recon:
            d = rng.choice(dirs)
            t += rng.uniform(0.0005, 0.003)
            self.emit(_Ev(t, "getdents64", shell, sudo_pid, *root, paths=[(d, 0)], cwd="/root",
                          attack=True))
            n += 1
            for j in range(rng.randrange(3, 12)):
                if n >= self.spec.privesc_recon:
                    break
                f = f"{d}/{rng.choice(RECON_NAMES)}"
                sc = rng.choice(["newfstatat", "newfstatat", "openat", "read", "access"])
                t += rng.uniform(0.0005, 0.003)
                self.emit(_Ev(t, sc, shell, sudo_pid, *root,
                              paths=[(f, 0)] if sc in PATH_CALLS else [], cwd="/root",
                              attack=True))
                n += 1

    def noise(self) -> list[tuple[float, str]]:
        """Standalone non-SYSCALL events (dropped by the parser)."""
        out = []
        if self.spec.noise_rate <= 0:
            return out
        t = self.rng.expovariate(self.spec.noise_rate)
        while t < self.spec.duration:
            out.append((t, self.rng.choice(["SERVICE_START", "CRED_DISP", "USER_ACCT"])))
            t += self.rng.expovariate(self.spec.noise_rate)
        return out


def _hex_sockaddr(addr: str) -> str:
    """Encode a canonical address back into auditd's raw ``saddr`` hex."""
    if addr.startswith("unix:"):
        return ("0100" + addr[5:].encode().hex() + "00").upper()
    host, port = addr.rsplit(":", 1)
    octets = bytes(int(x) for x in host.split("."))
    return ("0200" + int(port).to_bytes(2, "big").hex() + octets.hex() + "00" * 8).upper()


def _render(ev: _Ev, serial: int, table: SyscallTable) -> list[str]:
    ts = f"{BASE_EPOCH + ev.t:.3f}"
    head = f"msg=audit({ts}:{serial}):"
    nr = table[ev.syscall]
    items = len(ev.paths)
    lines = [
        f"type=SYSCALL {head} arch=c000003e syscall={nr} success=yes exit=0 a0=3 a1=7ffd a2=0 a3=0 "
        f"items={items} ppid={ev.ppid} pid={ev.pid} auid=4294967295 uid={ev.uid} gid={ev.uid} "
        f"euid={ev.uid} suid={ev.uid} fsuid={ev.uid} egid={ev.uid} sgid={ev.uid} fsgid={ev.uid} "
        f"tty=(none) ses=4294967295 comm=\"{ev.comm}\" exe=\"{ev.exe}\" key=(null)"
    ]
    if ev.syscall == "execve" and ev.argv:
        args = " ".join(f'a{i}="{a}"' for i, a in enumerate(ev.argv))
        lines.append(f"type=EXECVE {head} argc={len(ev.argv)} {args}")
    if ev.sockaddr:
        lines.append(f"type=SOCKADDR {head} saddr={_hex_sockaddr(ev.sockaddr)}")
    if ev.paths and ev.cwd:
        lines.append(f'type=CWD {head} cwd="{ev.cwd}"')
    for i, (p, inode) in enumerate(ev.paths):
        lines.append(
            f'type=PATH {head} item={i} name="{p}" inode={inode} dev=08:01 mode=0100644 '
            f"ouid=0 ogid=0 rdev=00:00 nametype=NORMAL cap_fp=0 cap_fi=0 cap_fe=0 cap_fver=0"
        )
    if ev.syscall == "execve" and ev.argv:
        lines.append(f"type=PROCTITLE {head} proctitle={chr(0).join(ev.argv).encode().hex().upper()}")
    return lines


def generate(spec: ScenarioSpec) -> SynthLog:
    table = load_syscall_table(spec.table)
    gen = _Gen(spec, table)
    for prof in spec.profiles:
        gen.background(prof)
    if spec.attack is not Attack.NONE:
        start = spec.attack_start
        if start is None:
            start = gen.rng.uniform(0.3, 0.7) * spec.duration
        gen.attack(start)
    noise = gen.noise()

    # millisecond timestamps; ties keep generation order
    for ev in gen.events:
        ev.t = round(ev.t, 3)
    items: list[tuple[float, int, object]] = [(ev.t, i, ev) for i, ev in enumerate(gen.events)]
    items += [(round(t, 3), len(items) + j, kind) for j, (t, kind) in enumerate(noise)]
    items.sort(key=lambda x: (x[0], x[1]))

    lines: list[str] = []
    serial = gen.rng.randrange(1000, 90000)
    attack_ts = []
    for t, _, obj in items:
        serial += 1
        if isinstance(obj, _Ev):
            lines.extend(_render(obj, serial, table))
            if obj.attack:
                attack_ts.append(BASE_EPOCH + obj.t)
        else:
            lines.append(f"type={obj} msg=audit({BASE_EPOCH + t:.3f}:{serial}): pid=1 uid=0 "
                         f"auid=4294967295 ses=4294967295 msg='unit=cron comm=\"systemd\" res=success'")
    window = None
    if attack_ts:
        first, last = round(min(attack_ts), 3), round(max(attack_ts), 3)
        window = AttackWindow(first, max(round(last - first, 3), 0.001))
    return SynthLog("\n".join(lines) + "\n", window, len(gen.events), len(noise),
                    sum(1 for e in gen.events if e.attack))


def scenario_logs(attack: Attack | str, n: int, seed: int = 0, **kwargs) -> list[SynthLog]:
    """``n`` logs of one attack shape with consecutive seeds."""
    return [generate(ScenarioSpec(attack=Attack.parse(attack), seed=seed + i, **kwargs))
            for i in range(n)]


def names_for(attack: Attack | str, n: int) -> Sequence[str]:
    return [f"{Attack.parse(attack).value}_{i:03d}" for i in range(n)]
