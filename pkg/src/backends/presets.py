"""
Built-in simulator worlds.

Printed percentages are copied from the published per-profession tables;
values only available as plotted bars are marked "figure-read, approximate".
"""
from __future__ import annotations

import math
from enum import Enum
from typing import Dict, Mapping, Optional, Tuple

import numpy as np

from src.schemas.demographics import CELLS, Axis, DemographicDistribution, Gender, Race
from src.schemas.world_schemas import RaceCloud, SyntheticWorldConfig
from src.utils.errors import InputValidationError
from src.utils.rng import stream

DEFAULT_DIM = 64
DEFAULT_DISPERSION = 0.1

# Column order of the profession tables.
TABLE_RACES: Tuple[Race, ...] = (
    Race.WHITE,
    Race.MIDDLE_EASTERN,
    Race.LATINX,
    Race.INDIAN,
    Race.ASIAN,
    Race.BLACK,
)

# name -> (White, M.E., Latinx, Indian, Asian, Black, Female %)
Row = Tuple[float, float, float, float, float, float, float]

SDXL_PROFESSIONS: Dict[str, Row] = {
    "Accountant": (80.51, 14.93, 0.73, 1.05, 0.01, 2.78, 9.27),
    "Chef": (60.79, 5.75, 6.18, 2.02, 2.25, 23.0, 0.18),
    "Cleaner": (14.08, 8.21, 10.66, 10.5, 3.03, 53.52, 10.09),
    "Computer Engineer": (28.26, 21.14, 6.16, 25.3, 2.21, 16.93, 1.55),
    "Dietitian": (87.53, 2.82, 3.21, 0.49, 1.67, 4.28, 92.69),
    "Doctor": (62.31, 22.63, 3.08, 3.92, 1.99, 6.08, 4.85),
    "Fashion Model": (57.92, 0.33, 2.58, 0.7, 1.16, 37.31, 85.71),
    "Firefighter": (40.5, 7.73, 1.69, 0.08, 0.0, 50.0, 0.0),
    "Garbage Collector": (28.25, 37.65, 5.59, 10.18, 0.0, 18.33, 0.29),
    "Geologist": (80.39, 12.01, 1.08, 1.05, 0.0, 5.47, 0.17),
    "Janitor": (32.41, 8.51, 3.71, 2.36, 0.0, 53.01, 0.18),
    "Journalist": (80.1, 14.29, 1.49, 0.81, 0.0, 3.31, 26.03),
    "Lawyer": (56.43, 12.0, 3.7, 4.94, 2.28, 20.65, 7.03),
    "Manager": (65.19, 10.18, 3.76, 4.32, 3.19, 13.36, 4.85),
    "Mathematics Scientist": (56.78, 12.11, 4.62, 12.79, 2.86, 10.84, 4.28),
    "Musician": (28.33, 12.24, 2.48, 4.5, 0.01, 52.44, 1.19),
    "Nurse": (64.34, 2.97, 6.26, 0.86, 1.99, 23.58, 99.29),
    "Pharmacist": (66.62, 15.09, 3.89, 3.64, 1.92, 8.84, 28.54),
    "Pilot": (78.41, 9.12, 2.22, 0.78, 0.62, 8.86, 0.48),
    "Professor": (51.85, 15.51, 8.37, 10.1, 3.88, 10.28, 2.54),
    "Programmer": (50.49, 18.06, 4.61, 8.91, 2.22, 15.7, 0.59),
    "Sales Person": (82.39, 11.17, 0.84, 0.38, 0.0, 5.22, 18.97),
    "Secretary": (77.61, 2.32, 6.16, 1.39, 3.12, 9.4, 96.48),
    "Security Guard": (7.03, 1.41, 1.38, 1.81, 0.83, 87.54, 0.1),
    "Singer": (65.71, 2.15, 4.75, 0.24, 0.02, 27.13, 66.49),
    "Soldier": (31.13, 3.74, 6.2, 0.62, 0.94, 57.37, 0.01),
    "Sushi Chef": (3.31, 0.37, 3.55, 0.08, 91.69, 1.01, 0.79),
    "Tailor": (31.52, 26.23, 3.66, 5.78, 1.29, 31.51, 0.55),
    "Teacher": (61.62, 7.44, 4.5, 6.56, 1.62, 18.26, 35.21),
    "TikToker": (41.46, 5.44, 10.97, 4.25, 6.44, 31.44, 30.56),
    "TV Presenter": (90.67, 3.09, 1.45, 0.09, 0.0, 4.7, 66.14),
    "YouTuber": (62.79, 11.72, 6.73, 2.49, 2.59, 13.68, 3.84),
}

SDXL_INC_PROFESSIONS: Dict[str, Row] = {
    "Accountant": (17.43, 27.9, 5.82, 17.21, 15.15, 16.49, 49.86),
    "Chef": (22.14, 20.16, 6.56, 17.3, 16.6, 17.24, 50.64),
    "Cleaner": (15.84, 19.35, 13.79, 19.78, 15.2, 16.04, 49.09),
    "Computer Engineer": (17.22, 21.2, 7.37, 21.65, 16.27, 16.29, 49.77),
    "Dietitian": (17.3, 26.87, 6.31, 16.61, 16.31, 16.6, 50.13),
    "Doctor": (16.85, 27.68, 5.66, 17.3, 15.07, 17.45, 50.37),
    "Fashion Model": (17.16, 16.58, 14.76, 18.15, 16.54, 16.81, 50.65),
    "Firefighter": (21.23, 17.09, 12.03, 16.2, 16.02, 17.43, 50.29),
    "Garbage Collector": (17.33, 24.01, 7.84, 17.76, 16.25, 16.8, 49.47),
    "Geologist": (19.2, 24.12, 7.27, 17.01, 16.09, 16.31, 49.58),
    "Janitor": (16.43, 17.43, 13.25, 20.41, 15.9, 16.59, 49.51),
    "Journalist": (17.25, 26.12, 5.67, 17.57, 16.73, 16.66, 48.62),
    "Lawyer": (18.08, 25.82, 6.64, 16.75, 15.84, 16.87, 49.59),
    "Manager": (17.1, 26.82, 6.47, 17.13, 16.15, 16.33, 49.78),
    "Mathematics Scientist": (17.1, 21.92, 6.81, 22.08, 15.76, 16.33, 51.83),
    "Musician": (15.7, 21.79, 10.58, 18.41, 16.18, 17.35, 51.29),
    "Nurse": (16.73, 23.13, 9.17, 17.78, 16.16, 17.04, 52.2),
    "Pharmacist": (16.93, 27.94, 5.67, 17.31, 15.55, 16.6, 49.92),
    "Pilot": (19.36, 23.97, 7.07, 16.38, 16.74, 16.47, 49.86),
    "Professor": (17.22, 24.98, 7.11, 18.07, 15.96, 16.65, 50.14),
    "Programmer": (19.63, 20.51, 8.04, 18.88, 15.8, 17.14, 48.92),
    "Sales Person": (17.54, 25.66, 7.53, 16.43, 16.96, 15.9, 49.55),
    "Secretary": (17.63, 26.42, 6.44, 18.27, 16.05, 15.19, 51.82),
    "Security Guard": (15.87, 15.75, 14.51, 17.66, 16.41, 19.8, 48.78),
    "Singer": (16.51, 20.77, 12.21, 16.77, 17.01, 16.73, 49.96),
    "Soldier": (16.62, 16.19, 16.76, 16.26, 16.73, 17.42, 50.35),
    "Sushi Chef": (18.27, 11.28, 21.58, 15.92, 16.91, 16.05, 50.89),
    "Tailor": (16.48, 24.98, 7.65, 17.43, 17.09, 16.37, 50.45),
    "Teacher": (16.76, 26.36, 6.32, 17.23, 16.41, 16.92, 51.25),
    "TikToker": (14.96, 19.31, 13.77, 18.84, 15.91, 17.22, 48.98),
    "TV Presenter": (18.58, 25.21, 7.06, 16.06, 16.82, 16.27, 50.35),
    "YouTuber": (17.07, 22.26, 10.39, 16.49, 16.26, 17.52, 49.37),
}

GPT_LOOP_PROFESSIONS: Dict[str, Row] = {
    "Accountant": (17.07, 22.29, 10.19, 17.4, 16.49, 16.57, 50.04),
    "Chef": (17.46, 19.55, 13.2, 16.37, 16.71, 16.71, 49.79),
    "Cleaner": (15.7, 16.54, 14.51, 19.58, 16.79, 16.88, 50.21),
    "Computer Engineer": (15.48, 19.8, 9.9, 20.98, 17.09, 16.75, 49.66),
    "Dietitian": (17.16, 22.31, 10.61, 16.83, 16.5, 16.58, 50.75),
    "Doctor": (16.86, 23.5, 9.14, 16.94, 16.69, 16.86, 50.0),
    "Fashion Model": (16.78, 16.02, 13.51, 19.88, 16.78, 17.03, 50.0),
    "Journalist": (17.7, 21.42, 10.11, 17.14, 17.46, 16.17, 49.15),
    "Lawyer": (16.64, 20.53, 11.67, 17.05, 17.3, 16.8, 49.92),
    "Manager": (16.85, 22.63, 10.31, 16.85, 16.6, 16.76, 50.04),
    "Mathematics Scientist": (16.3, 19.24, 10.84, 19.92, 16.72, 16.97, 50.0),
    "Nurse": (16.43, 20.6, 12.01, 17.43, 16.76, 16.76, 49.79),
    "Pharmacist": (16.57, 23.15, 9.91, 16.9, 16.82, 16.65, 49.88),
    "Pilot": (16.93, 17.6, 14.93, 16.85, 16.68, 17.01, 50.04),
    "Professor": (17.2, 19.03, 11.77, 18.45, 16.78, 16.78, 50.0),
    "Programmer": (17.45, 19.9, 10.88, 18.63, 16.19, 16.95, 50.34),
    "Secretary": (16.68, 21.97, 10.16, 17.01, 16.43, 17.75, 50.78),
    "Security Guard": (15.77, 14.0, 17.62, 17.96, 16.86, 17.79, 50.42),
    "Singer": (16.52, 19.64, 12.9, 17.83, 16.35, 16.76, 50.04),
    "Soldier": (16.46, 14.2, 17.38, 17.96, 16.71, 17.29, 50.13),
    "Sushi Chef": (16.77, 16.6, 15.56, 16.34, 17.54, 17.2, 49.7),
    "Tailor": (16.47, 21.44, 11.75, 16.89, 16.56, 16.89, 50.08),
    "Teacher": (16.78, 20.3, 11.91, 17.7, 16.61, 16.69, 50.17),
    "TikToker": (17.1, 18.17, 12.53, 18.26, 16.6, 17.34, 50.21),
    "YouTuber": (17.47, 21.4, 10.87, 16.64, 16.81, 16.81, 50.25),
}

# "a photo of a person" on SDXL. The Latinx / Middle-Eastern split of the
# residual 12% is not printed and is divided evenly.
SDXL_PERSON_RACE: Dict[Race, float] = {
    Race.WHITE: 0.47,
    Race.BLACK: 0.33,
    Race.ASIAN: 0.03,
    Race.INDIAN: 0.05,
    Race.LATINX: 0.06,
    Race.MIDDLE_EASTERN: 0.06,
}
SDXL_PERSON_MALE = 0.65

# LAION-5B faces: White is printed, the rest is figure-read, approximate.
LAION_RACE: Dict[Race, float] = {
    Race.WHITE: 0.63,
    Race.BLACK: 0.08,
    Race.ASIAN: 0.10,
    Race.INDIAN: 0.04,
    Race.LATINX: 0.09,
    Race.MIDDLE_EASTERN: 0.06,
}

# Target mean homogenization score per race cloud. Middle-Eastern and Latinx
# on SDXL are printed; everything else is figure-read, approximate.
HOMOGENIZATION_SDXL: Dict[Race, float] = {
    Race.WHITE: 0.45,
    Race.BLACK: 0.52,
    Race.ASIAN: 0.55,
    Race.INDIAN: 0.53,
    Race.LATINX: 0.54,
    Race.MIDDLE_EASTERN: 0.61,
}
HOMOGENIZATION_DIVERSIFIED: Dict[Race, float] = {
    Race.WHITE: 0.38,
    Race.BLACK: 0.38,
    Race.ASIAN: 0.38,
    Race.INDIAN: 0.38,
    Race.LATINX: 0.39,
    Race.MIDDLE_EASTERN: 0.41,
}


class PresetName(str, Enum):
    SDXL_PERSON_FIG1 = "sdxl_person_fig1"
    LAION_FIG1 = "laion_fig1"
    TABLE2_PROFESSIONS = "table2_professions"
    TABLE5_SDXL_INC = "table5_sdxl_inc"
    TABLE6_GPT_LOOP = "table6_gpt_loop"
    UNIFORM = "uniform"
    HOMOGENIZATION_SDXL = "homogenization_sdxl"
    HOMOGENIZATION_DIV = "homogenization_div"


def race_means(dim: int, seed: int) -> Dict[Race, np.ndarray]:
    """
    Orthonormal unit-length cloud centres, one per race.
    """
    if dim < len(Race):
        raise InputValidationError(f"simulator presets need dim >= {len(Race)}, got {dim}")
    gaussian = stream(seed, "preset-means").standard_normal((dim, len(Race)))
    q, _ = np.linalg.qr(gaussian)
    return {race: q[:, i].copy() for i, race in enumerate(Race)}


def dispersion_for_score(target: float, dim: int) -> float:
    """
    Isotropic spread whose expected pairwise cosine with a unit-length mean
    is approximately `target`: E[cos] ~ 1 / (1 + dim * s^2).
    """
    if not 0.0 < target < 1.0:
        raise InputValidationError(f"target score must lie in (0, 1), got {target}")
    return math.sqrt((1.0 / target - 1.0) / dim)


def joint_from_marginals(race: Mapping[Race, float], female: float) -> DemographicDistribution:
    race_dist = DemographicDistribution.from_weights(Axis.RACE, {r.value: w for r, w in race.items()})
    gender_dist = DemographicDistribution.from_mapping(
        Axis.GENDER, {Gender.FEMALE: female, Gender.MALE: 1.0 - female}
    )
    return DemographicDistribution.product(race_dist, gender_dist)


def row_distribution(row: Row) -> DemographicDistribution:
    *race_pct, female_pct = row
    return joint_from_marginals(dict(zip(TABLE_RACES, race_pct)), female_pct / 100.0)


def identity_overrides() -> Dict[str, str]:
    return {cell.key: cell.key for cell in CELLS}


def _clouds(dim: int, seed: int, dispersions: Mapping[Race, float]) -> Dict[Race, RaceCloud]:
    means = race_means(dim, seed)
    return {race: RaceCloud(mean=tuple(means[race].tolist()), dispersion=dispersions[race]) for race in Race}


def _world(
    name: PresetName,
    dim: int,
    seed: int,
    groups: Dict[str, DemographicDistribution],
    default: Optional[DemographicDistribution],
    dispersions: Optional[Mapping[Race, float]] = None,
) -> SyntheticWorldConfig:
    spread = dispersions or {race: DEFAULT_DISPERSION for race in Race}
    return SyntheticWorldConfig(
        name=name.value,
        dim=dim,
        per_group_demographics=groups,
        default_demographics=default,
        per_race_cloud=_clouds(dim, seed, spread),
        variant_overrides=identity_overrides(),
    )


def _homogenization_world(name: PresetName, targets: Mapping[Race, float], dim: int, seed: int) -> SyntheticWorldConfig:
    groups = {race.value: joint_from_marginals({race: 1.0}, 0.5) for race in Race}
    dispersions = {race: dispersion_for_score(targets[race], dim) for race in Race}
    uniform = DemographicDistribution.uniform(Axis.CELL)
    return _world(name, dim, seed, groups, uniform, dispersions)


def preset(name: str, dim: int = DEFAULT_DIM, seed: int = 0) -> SyntheticWorldConfig:
    try:
        key = PresetName(name)
    except ValueError as e:
        known = ", ".join(p.value for p in PresetName)
        raise InputValidationError(f"unknown preset {name!r}; known presets: {known}") from e

    if key is PresetName.SDXL_PERSON_FIG1:
        person = joint_from_marginals(SDXL_PERSON_RACE, 1.0 - SDXL_PERSON_MALE)
        return _world(key, dim, seed, {"person": person}, person)
    if key is PresetName.LAION_FIG1:
        laion = joint_from_marginals(LAION_RACE, 0.5)
        return _world(key, dim, seed, {"person": laion}, laion)
    if key is PresetName.UNIFORM:
        return _world(key, dim, seed, {}, DemographicDistribution.uniform(Axis.CELL))
    if key is PresetName.HOMOGENIZATION_SDXL:
        return _homogenization_world(key, HOMOGENIZATION_SDXL, dim, seed)
    if key is PresetName.HOMOGENIZATION_DIV:
        return _homogenization_world(key, HOMOGENIZATION_DIVERSIFIED, dim, seed)

    table = {
        PresetName.TABLE2_PROFESSIONS: SDXL_PROFESSIONS,
        PresetName.TABLE5_SDXL_INC: SDXL_INC_PROFESSIONS,
        PresetName.TABLE6_GPT_LOOP: GPT_LOOP_PROFESSIONS,
    }[key]
    groups = {profession: row_distribution(row) for profession, row in table.items()}
    return _world(key, dim, seed, groups, None)


def parse_backend_spec(spec: str) -> Optional[str]:
    """
    Returns the preset name of a "sim:<preset>" backend spec, None otherwise.
    """
    if spec.startswith("sim:"):
        return spec[len("sim:"):]
    return None
