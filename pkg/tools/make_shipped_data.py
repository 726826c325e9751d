"""Generate the packaged default config and stand-in animal datasets.

Run from the repository root:  python3 tools/make_shipped_data.py

The animal panels are fixed tables, not simulation output: event counts were
picked by hand and are only written out after passing the calibration gates
below.  The intended prior geometry, checked before anything is written:

* a monkey-only analysis puts the predictive median DLT risk in the target
  band at the 5 mg/kg reference dose, with little information below it, so
  monkey evidence alone reads the top half of the human grid as tolerable;
* a rat-only analysis puts its median in the target band already at 1 mg/kg,
  flagging meaningful risk from the first human dose levels upward.

The two sources deliberately disagree about where the risk sits.  A combined
analysis keeps that tension (and therefore real uncertainty) until human
outcomes arrive to arbitrate; neither species alone is allowed to look
confidently correct across the whole grid.
"""

from __future__ import annotations

import sys
from pathlib import Path

ROOT = Path(__file__).resolve().parents[1]
sys.path.insert(0, str(ROOT / "src"))

from exbridge.io import default_app_config, write_animal_data, write_config
from exbridge.mcmc import REDUCED_SETTINGS, prior_predictive
from exbridge.types import AnimalStudy, DoseGrid, MixtureWeights, ModelConfig

REFERENCE = 5.0
# dose (in each species' own mg/kg units) whose standalone predictive median
# must land in [0.16, 0.33) once translated to the human scale
ANCHOR = {"Rat": 1.0, "Monkey": 5.0}

# study_id, species, doses, subjects per dose, events per dose
STUDY_DESIGNS = [
    ("m1", "Monkey", (1.0, 10.0, 30.0, 100.0), (8, 8, 8, 8), (0, 1, 1, 3)),
    ("m2", "Monkey", (1.0, 10.0, 30.0, 100.0), (6, 8, 8, 6), (0, 1, 3, 4)),
    ("r1", "Rat", (1.0, 3.0, 6.0), (10, 10, 10), (0, 2, 3)),
    ("r2", "Rat", (2.0, 4.0, 8.0), (10, 10, 10), (1, 3, 4)),
    ("r3", "Rat", (1.0, 5.0, 12.0), (12, 12, 12), (0, 3, 6)),
]


def make_studies() -> list[AnimalStudy]:
    return [
        AnimalStudy(
            study_id=study_id,
            species=species,
            grid=DoseGrid(doses=doses, reference_dose=REFERENCE),
            n_treated=ns,
            n_events=events,
        )
        for study_id, species, doses, ns, events in STUDY_DESIGNS
    ]


def single_species_check(studies, cfg, species: str) -> list[tuple[float, float]]:
    subset = [s for s in studies if s.species == species]
    config = ModelConfig(
        species=(species,),
        subgroups=("NEW",),
        hyper=cfg.model.hyper,
        translation=cfg.model.translation,
        weights={"NEW": MixtureWeights(species=(1.0,), human=0.0, robust=0.0)},
    )
    pred = prior_predictive(
        subset, config, REDUCED_SETTINGS, [cfg.empty_trial("NEW")]
    )
    return [(row.dose, row.median) for row in pred.rows]


def main() -> int:
    cfg = default_app_config()
    studies = make_studies()
    for s in studies:
        print(f"{s.study_id} ({s.species}): doses {s.grid.doses} n {s.n_treated} r {s.n_events}")

    ok = True
    for species in ("Monkey", "Rat"):
        rows = single_species_check(studies, cfg, species)
        for dose, median in rows:
            print(f"  {species.lower()}-only predictive median at {dose:g} mg/kg: {median:.3f}")
        anchor = ANCHOR[species]
        at_anchor = next(m for d, m in rows if d == anchor)
        if not 0.16 <= at_anchor < 0.33:
            print(
                f"calibration failed: {species.lower()}-only median {at_anchor:.3f} "
                f"at {anchor} mg/kg outside [0.16, 0.33)"
            )
            ok = False
    if not ok:
        return 1

    data_dir = ROOT / "src" / "exbridge" / "data"
    write_config(cfg, data_dir / "default_config.json")
    write_animal_data(studies, data_dir / "animal_studies.csv")
    print(f"wrote {data_dir / 'default_config.json'}")
    print(f"wrote {data_dir / 'animal_studies.csv'}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
