"""Regenerate the bundled 50-row synthetic case file.

Usage: python3 scripts/make_synthetic_cibh.py [OUTPUT]

The file mimics the serious-injury group: statutory range 36..120 months,
two conviction features (z_1 = voluntary surrender, z_2 = confession), one
other feature (v_1 = prior record) and the four mitigating-feature
indicators used by the exclusivity check.  The last two rows have no
outcome and exercise prediction-only handling.
"""

import sys
from pathlib import Path

import numpy as np

from sentencing_mlms.dataset import write_dataset
from sentencing_mlms.sms_core import CaseRecord, StructuralParams, saturate, sms_inner

SEED = 20240601
N_ROWS = 50
N_UNLABELLED = 2
LOWER, UPPER, SIGMA = 36.0, 120.0, 9.17
STRUCTURAL = StructuralParams(b=6.0, c=3.0, d=1.0, e=0.5, eta=0.0, p=(-0.2, -0.1), q=(0.15,))
# (voluntary_surrender, confession, plea_guilt_accept_punishment, voluntary_plea_in_court)
COMBINATIONS = [(1, 0, 0, 0), (1, 0, 1, 0), (0, 1, 0, 0), (0, 1, 1, 0), (0, 0, 1, 0), (0, 0, 0, 1), (0, 0, 0, 0)]


def main(out: Path):
    rng = np.random.Generator(np.random.PCG64(SEED))
    records, extra = [], []
    for k in range(N_ROWS):
        combo = COMBINATIONS[rng.integers(len(COMBINATIONS))]
        x = tuple(int(t) for t in np.minimum(rng.poisson((1.0, 0.6, 0.4, 0.3)), 3))
        rec = CaseRecord(
            case_id=f"syn-{k + 1:03d}",
            group="serious",
            a=float(rng.integers(36, 61)),
            x=x,
            z=(float(combo[0]), float(combo[1])),
            v=(float(rng.random() < 0.3),),
            lower=LOWER,
            upper=UPPER,
            strict_binary=True,
        )
        y = saturate(round(sms_inner(STRUCTURAL, rec) + SIGMA * rng.standard_normal(), 1), LOWER, UPPER)
        if k < N_ROWS - N_UNLABELLED:
            rec = CaseRecord(**{**rec.__dict__, "y": float(y)})
        records.append(rec)
        extra.append(
            dict(zip(("voluntary_surrender", "confession", "plea_guilt_accept_punishment", "voluntary_plea_in_court"), combo))
        )
    write_dataset(out, records, extra)


if __name__ == "__main__":
    default = Path(__file__).resolve().parents[1] / "src" / "sentencing_mlms" / "data" / "synthetic_cibh.csv"
    main(Path(sys.argv[1]) if len(sys.argv) > 1 else default)
