"""Policy layer: glob-scoped allow/deny rules checked before every tool call.

Semantics:
  * a policy matches when its action/resource/principal globs all match and
    its condition (if any) applies to the attempt;
  * a matching policy with ``requires_approval`` acts as an approval gate:
    the attempt is allowed when the ``approved`` flag is set, denied otherwise;
  * among matching policies any deny wins (first deny's id is reported);
  * with no matching policy, actions are denied by default while diagnostic
    and audit tools are allowed by default.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .util import glob_match

DENY_REASONS = ("explicit_deny", "requires_approval", "default_deny", "principal_mismatch")


@dataclass(frozen=True)
class Policy:
    policy_id: str
    effect: str  # "allow" | "deny"
    action_pattern: object  # glob or list of globs
    resource_pattern: object = "*"
    principal_pattern: object = "*"
    condition: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.effect not in ("allow", "deny"):
            raise ValueError(f"policy {self.policy_id}: effect must be allow or deny")

    @classmethod
    def from_dict(cls, raw: dict) -> "Policy":
        return cls(
            policy_id=str(raw["policy_id"]),
            effect=str(raw["effect"]),
            action_pattern=raw.get("action_pattern", "*"),
            resource_pattern=raw.get("resource_pattern", "*"),
            principal_pattern=raw.get("principal_pattern", "*"),
            condition=dict(raw.get("condition", {})),
        )


@dataclass(frozen=True)
class GuardrailDecision:
    allowed: bool
    reason: str  # "allow" | "default_allow" | one of DENY_REASONS
    policy_id: str | None = None


def _resource_matches(pattern, resource_id: str, resource_env: str | None) -> bool:
    # patterns may address the id directly or the env tag form ("env:production")
    if glob_match(pattern, resource_id):
        return True
    return resource_env is not None and glob_match(pattern, f"env:{resource_env}")


def check_guardrail(
    policies: list[Policy],
    tool_name: str,
    category: str,
    resource_id: str = "",
    resource_env: str | None = None,
    principal: str = "",
    approved: bool = False,
) -> GuardrailDecision:
    """Decide one attempt. Evaluation is pure; no state is touched."""
    allows: list[Policy] = []
    denies: list[tuple[Policy, str]] = []
    principal_blocked = False
    for policy in policies:
        if not glob_match(policy.action_pattern, tool_name):
            continue
        if not _resource_matches(policy.resource_pattern, resource_id, resource_env):
            continue
        env_not = policy.condition.get("env_not")
        if env_not is not None and resource_env == env_not:
            continue
        if not glob_match(policy.principal_pattern, principal):
            if policy.effect == "allow":
                principal_blocked = True
            continue
        if policy.condition.get("requires_approval"):
            if approved:
                allows.append(policy)
            else:
                denies.append((policy, "requires_approval"))
        elif policy.effect == "deny":
            denies.append((policy, "explicit_deny"))
        else:
            allows.append(policy)
    if denies:
        policy, reason = denies[0]
        return GuardrailDecision(False, reason, policy.policy_id)
    if allows:
        return GuardrailDecision(True, "allow", allows[0].policy_id)
    if category == "action":
        reason = "principal_mismatch" if principal_blocked else "default_deny"
        return GuardrailDecision(False, reason)
    return GuardrailDecision(True, "default_allow")
