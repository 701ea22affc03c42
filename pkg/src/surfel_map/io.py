"""Line-delimited JSON dump of surfels for visualization."""

from pathlib import Path
from typing import Iterable, List, Union

from pydantic import BaseModel, Field

from .types import Surfel


class SurfelRecord(BaseModel):
    """One surfel as written to disk."""
    cell: List[int] = Field(..., min_length=3, max_length=3)
    normal: List[float] = Field(..., min_length=3, max_length=3)
    d: float
    planarity: float = Field(ge=0.0, le=1.0)
    count: int = Field(ge=0)

    @classmethod
    def from_surfel(cls, surfel: Surfel) -> "SurfelRecord":
        cell = surfel.cell
        return cls(
            cell=list(cell.index) if cell is not None else [0, 0, 0],
            normal=[float(x) for x in surfel.normal],
            d=surfel.d,
            planarity=surfel.planarity,
            count=cell.count if cell is not None else 0,
        )


def dump_surfels(path: Union[str, Path], surfels: Iterable[Surfel]) -> int:
    """Write one JSON record per surfel and return the count."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    count = 0
    with path.open("w", encoding="utf-8") as f:
        for surfel in surfels:
            f.write(SurfelRecord.from_surfel(surfel).model_dump_json() + "\n")
            count += 1
    return count


def load_surfels(path: Union[str, Path]) -> List[SurfelRecord]:
    """Read records written by :func:`dump_surfels`.

    Raises:
        ValidationError: A line is not valid JSON or not a valid record
    """
    records = []
    with Path(path).open("r", encoding="utf-8") as f:
        for line in f:
            if line.strip():
                records.append(SurfelRecord.model_validate_json(line))
    return records
