from __future__ import annotations

from typing import Iterable

from ..errors import ValidationError
from ..specs import AblationFlags


KNOWN_FLAGS = tuple(AblationFlags.model_fields)

# printed names of the variants in ablation tables
VARIANT_LABELS = {
    "": "full",
    "no_flow": "W/o OF",
    "no_backward": "W/o Br",
    "no_diversity": "W/o DA",
    "no_refine": "W/o RN",
    "no_joint_training": "W/o JT",
}


def parse_flags(raw: str | Iterable[str] | None) -> list[str]:
    if raw is None:
        return []
    items = raw.split(",") if isinstance(raw, str) else list(raw)
    names = [s.strip().replace("-", "_") for s in items if s and s.strip()]
    unknown = [n for n in names if n not in KNOWN_FLAGS]
    if unknown:
        raise ValidationError(f"Unknown ablation flag(s): {', '.join(unknown)} (known: {', '.join(KNOWN_FLAGS)})")
    return names


def ablation_variants(flags: str | Iterable[str] | AblationFlags | None) -> AblationFlags:
    """Flag names -> a validated `AblationFlags`.

    Bypassing the refine net leaves nothing for the flow flags to act on, so the
    two are rejected together.
    """
    out = flags if isinstance(flags, AblationFlags) else AblationFlags(**{n: True for n in parse_flags(flags)})
    if out.no_refine and (out.no_flow or out.no_backward):
        raise ValidationError("no_refine cannot be combined with no_flow or no_backward")
    return out


def single_flag_variants(names: str | Iterable[str]) -> list[tuple[str, AblationFlags]]:
    """One variant per named flag, in the order given."""
    return [(n, ablation_variants([n])) for n in parse_flags(names)]


def label(name: str) -> str:
    return VARIANT_LABELS.get(name, name)
