# synthdata/skeleton.py: SZKIELET (topologia + poza spoczynkowa)
# =====================================================================
# Offsety spoczynkowe w pikselach przy skali jednostkowej, we własnym układzie rodzica
# (kąt świata dziecka = kąt świata rodzica + kąt stawu). Zwierzę zwrócone pyskiem w −x.
# =====================================================================

from __future__ import annotations

from dataclasses import dataclass
from typing import Tuple

import numpy as np

from ..errors import ValidationError

MIN_REST_SEPARATION = 1.0


@dataclass(frozen=True)
class SkeletonSpec:
    name: str
    keypoint_names: Tuple[str, ...]
    parent: Tuple[int, ...]
    rest_offsets: Tuple[Tuple[float, float], ...]
    angle_ranges: Tuple[Tuple[float, float], ...]
    limb_pairs: Tuple[Tuple[int, int], ...]

    def __post_init__(self) -> None:
        n = len(self.keypoint_names)
        if not (len(self.parent) == len(self.rest_offsets) == len(self.angle_ranges) == n):
            raise ValidationError(f"SkeletonSpec[{self.name}]: niespójne długości pól (N={n})")
        if len(set(self.keypoint_names)) != n:
            raise ValidationError(f"SkeletonSpec[{self.name}]: zdublowane nazwy keypointów")
        roots = [i for i, p in enumerate(self.parent) if p == -1]
        if len(roots) != 1:
            raise ValidationError(f"SkeletonSpec[{self.name}]: wymagany dokładnie jeden korzeń, są {roots}")
        if any(not (-1 <= p < n) or p == i for i, p in enumerate(self.parent)):
            raise ValidationError(f"SkeletonSpec[{self.name}]: niepoprawne indeksy rodziców")
        self.order()  # cykle → błąd
        for lo, hi in self.angle_ranges:
            if lo > hi:
                raise ValidationError(f"SkeletonSpec[{self.name}]: zakres kąta ({lo}, {hi}) odwrócony")
        for i, j in self.limb_pairs:
            if not (0 <= i < n and 0 <= j < n) or i == j:
                raise ValidationError(f"SkeletonSpec[{self.name}]: kość ({i}, {j}) poza zakresem")
        rest = self.rest_pose()
        dist = np.linalg.norm(rest[:, None, :] - rest[None, :, :], axis=-1)
        dist[np.diag_indices(n)] = np.inf
        if n > 1 and dist.min() < MIN_REST_SEPARATION:
            raise ValidationError(f"SkeletonSpec[{self.name}]: keypointy bliżej niż {MIN_REST_SEPARATION} px")

    @property
    def n(self) -> int:
        return len(self.keypoint_names)

    @property
    def root(self) -> int:
        return self.parent.index(-1)

    def order(self) -> Tuple[int, ...]:
        """Kolejność topologiczna (rodzic przed dzieckiem)."""
        out, placed = [self.root], {self.root}
        while len(out) < self.n:
            grown = False
            for i, p in enumerate(self.parent):
                if i not in placed and p in placed:
                    out.append(i)
                    placed.add(i)
                    grown = True
            if not grown:
                raise ValidationError(f"SkeletonSpec[{self.name}]: rodzice nie tworzą drzewa")
        return tuple(out)

    def forward_kinematics(self, joint_angles: np.ndarray, rotation: float = 0.0, unit: float = 1.0) -> np.ndarray:
        """Pozycje N×2 względem korzenia w (0,0)."""
        pos = np.zeros((self.n, 2), dtype=np.float64)
        world = np.zeros(self.n, dtype=np.float64)
        offs = np.asarray(self.rest_offsets, dtype=np.float64) * unit
        for i in self.order():
            p = self.parent[i]
            base = rotation if p == -1 else world[p]
            world[i] = base + joint_angles[i]
            if p == -1:
                continue
            c, s = np.cos(world[i]), np.sin(world[i])
            ox, oy = offs[i]
            pos[i] = pos[p] + (c * ox - s * oy, s * ox + c * oy)
        return pos

    def rest_pose(self) -> np.ndarray:
        return self.forward_kinematics(np.zeros(self.n))

    def reach(self) -> float:
        """Promień dysku zawierającego każdą pozę (suma długości kości na łańcuchu od korzenia)."""
        lengths = np.linalg.norm(np.asarray(self.rest_offsets, dtype=np.float64), axis=1)
        acc = np.zeros(self.n)
        for i in self.order():
            p = self.parent[i]
            acc[i] = 0.0 if p == -1 else acc[p] + lengths[i]
        return float(acc.max())

    def skeleton_1based(self) -> list[list[int]]:
        return [[i + 1, j + 1] for i, j in self.limb_pairs]


# ─────────────────────────────────────────────────────────────────────────────
# Wbudowany czworonóg (17 punktów, schemat AP-10K, korzeń = szyja)
# ─────────────────────────────────────────────────────────────────────────────
QUADRUPED_KEYPOINTS = (
    "left_eye", "right_eye", "nose", "neck", "root_of_tail",
    "left_shoulder", "left_elbow", "left_front_paw",
    "right_shoulder", "right_elbow", "right_front_paw",
    "left_hip", "left_knee", "left_back_paw",
    "right_hip", "right_knee", "right_back_paw",
)


def builtin_quadruped() -> SkeletonSpec:
    r = np.deg2rad
    return SkeletonSpec(
        name="quadruped",
        keypoint_names=QUADRUPED_KEYPOINTS,
        parent=(2, 2, 3, -1, 3, 3, 5, 6, 3, 8, 9, 4, 11, 12, 4, 14, 15),
        rest_offsets=(
            (-2.0, -2.5), (-2.0, 2.5),   # oczy względem nosa
            (-9.0, -3.0),                # nos względem szyi
            (0.0, 0.0),                  # szyja (korzeń)
            (15.0, 0.0),                 # nasada ogona
            (2.0, -2.0), (0.0, 7.0), (0.0, 7.0),    # lewa przednia
            (3.0, 2.0), (0.0, 7.0), (0.0, 7.0),     # prawa przednia
            (0.0, -3.0), (0.0, 8.0), (0.0, 7.0),    # lewa tylna
            (1.0, 3.0), (0.0, 8.0), (0.0, 7.0),     # prawa tylna
        ),
        angle_ranges=(
            (0.0, 0.0), (0.0, 0.0),
            (r(-30), r(30)),
            (0.0, 0.0),
            (r(-15), r(15)),
            (r(-10), r(10)), (r(-45), r(45)), (r(-40), r(40)),
            (r(-10), r(10)), (r(-45), r(45)), (r(-40), r(40)),
            (r(-10), r(10)), (r(-45), r(45)), (r(-40), r(40)),
            (r(-10), r(10)), (r(-45), r(45)), (r(-40), r(40)),
        ),
        limb_pairs=(
            (0, 2), (1, 2), (2, 3), (3, 4),
            (3, 5), (5, 6), (6, 7),
            (3, 8), (8, 9), (9, 10),
            (4, 11), (11, 12), (12, 13),
            (4, 14), (14, 15), (15, 16),
        ),
    )
