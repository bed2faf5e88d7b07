"""Role-based access control with per-entity ACLs and a user registry.

Resolution is default-deny: the most specific scope (per-entity before
global) wins, and at equal scope Deny overrides Allow. An empty ruleset
denies everything.

Passwords are hashed with scrypt; the parameters travel with each hash
so they can evolve. Authentication failure is indistinguishable between
unknown user and wrong password.
"""

from __future__ import annotations

import hmac
import ipaddress
import os
from dataclasses import dataclass, field
from hashlib import scrypt
from pathlib import Path
from typing import Iterable, Optional

PERMISSIONS = ("insert", "update", "retrieve", "delete", "read-log", "admin")

ANONYMOUS_ROLE = "anonymous"

_USERS_HEADER = "#rdmstore-users v1"
_RULES_HEADER = "#rdmstore-rules v1"


@dataclass(frozen=True)
class Principal:
    name: str
    roles: frozenset[str]
    authenticated: bool = False


ANONYMOUS = Principal("anonymous", frozenset({ANONYMOUS_ROLE}), authenticated=False)


@dataclass(frozen=True)
class AclRule:
    role: str
    permission: str
    effect: str  # "allow" | "deny"
    scope: Optional[int] = None  # None = global, else entity id

    def __post_init__(self):
        if self.permission not in PERMISSIONS:
            raise ValueError(f"unknown permission {self.permission!r}")
        if self.effect not in ("allow", "deny"):
            raise ValueError(f"unknown effect {self.effect!r}")


class AclEngine:
    """A loaded ruleset; swapped atomically on update, checks are read-only."""

    def __init__(self, rules: Iterable[AclRule] = ()):
        self.rules: tuple[AclRule, ...] = tuple(rules)

    def check(self, principal: Principal, permission: str, target: Optional[int]) -> str:
        """Resolve to "allow" or "deny"; no applicable rule means deny."""
        roles = principal.roles
        per_entity = []
        global_ = []
        for r in self.rules:
            if r.permission != permission or r.role not in roles:
                continue
            if r.scope is None:
                global_.append(r)
            elif target is not None and r.scope == target:
                per_entity.append(r)
        for bucket in (per_entity, global_):
            if bucket:
                return "deny" if any(r.effect == "deny" for r in bucket) else "allow"
        return "deny"

    def allows(self, principal: Optional[Principal], permission: str, target: Optional[int]) -> bool:
        return self.check(principal or ANONYMOUS, permission, target) == "allow"

    # ------------------------------------------------------------------
    # rules.caos: role<TAB>permission<TAB>scope<TAB>effect

    def save(self, path: str | Path) -> None:
        lines = [_RULES_HEADER]
        for r in self.rules:
            scope = "global" if r.scope is None else f"entity:{r.scope}"
            lines.append(f"{r.role}\t{r.permission}\t{scope}\t{r.effect}")
        Path(path).write_text("\n".join(lines) + "\n", "utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "AclEngine":
        lines = Path(path).read_text("utf-8").splitlines()
        if not lines or lines[0] != _RULES_HEADER:
            raise ValueError(f"{path}: missing header {_RULES_HEADER!r}")
        rules = []
        for line in lines[1:]:
            if not line.strip():
                continue
            role, permission, scope_text, effect = line.split("\t")
            scope = None if scope_text == "global" else int(scope_text.split(":", 1)[1])
            rules.append(AclRule(role, permission, effect, scope))
        return cls(rules)


def admin_ruleset(role: str = "admin") -> AclEngine:
    return AclEngine([AclRule(role, p, "allow") for p in PERMISSIONS])


# ---------------------------------------------------------------------------
# user registry

_SCRYPT_N, _SCRYPT_R, _SCRYPT_P = 2**14, 8, 1


def _hash_password(password: str, salt: bytes, n: int, r: int, p: int) -> bytes:
    return scrypt(password.encode("utf-8"), salt=salt, n=n, r=r, p=p, dklen=32)


@dataclass
class UserRecord:
    name: str
    password_hash: str  # scrypt$N$r$p$salthex$hashhex
    roles: frozenset[str] = field(default_factory=frozenset)


class UserRegistry:
    def __init__(self):
        self._users: dict[str, UserRecord] = {}
        # fixed decoy so unknown users cost the same as wrong passwords
        self._decoy_salt = b"\x00" * 16

    def add_user(self, name: str, password: str, roles: Iterable[str] = ()) -> None:
        salt = os.urandom(16)
        digest = _hash_password(password, salt, _SCRYPT_N, _SCRYPT_R, _SCRYPT_P)
        encoded = f"scrypt${_SCRYPT_N}${_SCRYPT_R}${_SCRYPT_P}${salt.hex()}${digest.hex()}"
        self._users[name] = UserRecord(name, encoded, frozenset(roles))

    def set_roles(self, name: str, roles: Iterable[str]) -> None:
        self._users[name].roles = frozenset(roles)

    def users(self) -> list[str]:
        return sorted(self._users)

    def authenticate(self, name: str, password: str) -> tuple[Principal, bool]:
        """On failure, the returned principal is anonymous."""
        record = self._users.get(name)
        if record is None:
            _hash_password(password, self._decoy_salt, _SCRYPT_N, _SCRYPT_R, _SCRYPT_P)
            return ANONYMOUS, False
        scheme, n, r, p, salt_hex, hash_hex = record.password_hash.split("$")
        assert scheme == "scrypt"
        candidate = _hash_password(password, bytes.fromhex(salt_hex), int(n), int(r), int(p))
        if not hmac.compare_digest(candidate, bytes.fromhex(hash_hex)):
            return ANONYMOUS, False
        return Principal(name, record.roles | {ANONYMOUS_ROLE}, authenticated=True), True

    # ------------------------------------------------------------------
    # users.caos: name<TAB>hash<TAB>role1,role2

    def save(self, path: str | Path) -> None:
        lines = [_USERS_HEADER]
        for name in sorted(self._users):
            rec = self._users[name]
            lines.append(f"{rec.name}\t{rec.password_hash}\t{','.join(sorted(rec.roles))}")
        Path(path).write_text("\n".join(lines) + "\n", "utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "UserRegistry":
        lines = Path(path).read_text("utf-8").splitlines()
        if not lines or lines[0] != _USERS_HEADER:
            raise ValueError(f"{path}: missing header {_USERS_HEADER!r}")
        reg = cls()
        for line in lines[1:]:
            if not line.strip():
                continue
            name, password_hash, roles_text = line.split("\t")
            roles = frozenset(r for r in roles_text.split(",") if r)
            reg._users[name] = UserRecord(name, password_hash, roles)
        return reg


def roles_for_address(address: str, cidr_roles: Iterable[tuple[str, str]]) -> set[str]:
    """Static CIDR-range → role assignment, evaluated at session start."""
    ip = ipaddress.ip_address(address)
    out = set()
    for cidr, role in cidr_roles:
        if ip in ipaddress.ip_network(cidr):
            out.add(role)
    return out
