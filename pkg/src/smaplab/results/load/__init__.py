"""
Result loading module.

Persists lab outputs: binary field dumps with a JSON sidecar, CSV and JSON
records, Parquet tables and a DuckDB database with analysis views.
"""

import json
import re
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Sequence, Tuple, Union

import duckdb
import numpy as np
import pandas as pd

from ...spectral import GridSpec

DUMP_SUFFIX = ".bin"
SIDECAR_SUFFIX = ".json"
TABLE_NAME = re.compile(r"^[a-zA-Z0-9_]+$")

Records = Union[pd.DataFrame, Sequence[Dict[str, Any]]]


def dump_paths(stem: Union[str, Path]) -> Tuple[Path, Path]:
    """Binary and sidecar paths of a dump stem (suffixes appended)."""
    stem = Path(stem)
    return stem.parent / (stem.name + DUMP_SUFFIX), stem.parent / (stem.name + SIDECAR_SUFFIX)


def write_field_dump(stem: Union[str, Path], values: np.ndarray, grid: GridSpec,
                     time: Optional[float] = None, components: Optional[int] = None,
                     extra: Optional[Dict[str, Any]] = None) -> Path:
    """
    Write a field as little-endian float64 in C order plus a JSON sidecar.

    The sidecar records {d, n, box_length, components, time}; complex values
    are stored as interleaved (re, im) with components doubled and a
    "complex" flag.

    Args:
        stem: Output path without suffix
        values: Array of shape (components,) + grid.shape (or grid.shape)
        grid: Grid of the field
        time: Physical time of the snapshot
        components: Leading component count (inferred when omitted)
        extra: Additional sidecar entries

    Returns:
        Path of the binary file
    """
    stem = Path(stem)
    stem.parent.mkdir(parents=True, exist_ok=True)
    values = np.asarray(values)
    if values.shape == grid.shape:
        values = values[None]
    if components is None:
        components = values.shape[0]
    is_complex = np.iscomplexobj(values)
    if is_complex:
        values = np.stack([values.real, values.imag], axis=1).reshape((-1,) + grid.shape)
    data_path, sidecar_path = dump_paths(stem)
    np.ascontiguousarray(values, dtype="<f8").tofile(data_path)
    sidecar = {"d": grid.d, "n": grid.n, "box_length": grid.box_length,
               "components": int(components), "time": time, "complex": bool(is_complex)}
    if extra:
        sidecar.update(extra)
    write_json(sidecar, sidecar_path, quiet=True)
    return data_path


def write_json(payload: Any, path: Union[str, Path], quiet: bool = False) -> Path:
    """Write JSON with sorted keys so identical results give identical bytes."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as f:
        json.dump(payload, f, indent=2, sort_keys=True, default=_json_default)
        f.write("\n")
    if not quiet:
        print(f"Saved {path}")
    return path


def _json_default(value: Any) -> Any:
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, (tuple, set)):
        return list(value)
    raise TypeError(f"Cannot serialize {type(value).__name__}")


def write_csv(records: Records, path: Union[str, Path], quiet: bool = False) -> pd.DataFrame:
    """Write records (DataFrame or list of dicts) as CSV and return the frame."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    df = records if isinstance(records, pd.DataFrame) else pd.DataFrame(list(records))
    df.to_csv(path, index=False, float_format="%.17g")
    if not quiet:
        print(f"Saved {path.name} ({len(df)} rows)")
    return df


def load_to_parquet(tables: Dict[str, pd.DataFrame], output_dir: str) -> None:
    """
    Save every table as <name>.parquet.

    Raises:
        ValueError: If a table name is not a plain identifier
    """
    output_path = Path(output_dir)
    output_path.mkdir(parents=True, exist_ok=True)
    for table_name, df in tables.items():
        _check_name(table_name)
        parquet_file = output_path / f"{table_name}.parquet"
        df.to_parquet(parquet_file, index=False)
        print(f"Saved {table_name} to {parquet_file} ({len(df)} rows)")


def _check_name(table_name: str) -> None:
    if not TABLE_NAME.match(table_name):
        raise ValueError(f"Invalid table name: {table_name}")


def load_to_duckdb(tables: Dict[str, pd.DataFrame], db_path: str) -> List[str]:
    """
    Load tables into a DuckDB file and create the analysis views.

    Returns:
        Names of the views that were created
    """
    db_file = Path(db_path)
    db_file.parent.mkdir(parents=True, exist_ok=True)
    with duckdb.connect(str(db_file)) as con:
        for table_name, df in tables.items():
            _check_name(table_name)
            con.register("incoming", df)
            con.execute(f"DROP TABLE IF EXISTS {table_name}")
            con.execute(f"CREATE TABLE {table_name} AS SELECT * FROM incoming")
            con.unregister("incoming")
            print(f"Loaded {table_name} to DuckDB ({len(df)} rows)")
        views = create_views(con, set(tables))
    print(f"\nDatabase saved to {db_path}")
    return views


VIEWS = {
    "vw_conservation_drift": ("fact_conservation", """
        CREATE OR REPLACE VIEW vw_conservation_drift AS
        SELECT
            scenario,
            COUNT(*) AS samples,
            MAX(t) AS t_final,
            MAX(ABS(E0_rel_drift)) AS max_E0_drift,
            MAX(ABS(E1_rel_drift)) AS max_E1_drift,
            MAX(sphere_drift) AS max_sphere_drift,
            MAX(boundary_tail) AS max_boundary_tail
        FROM fact_conservation
        GROUP BY scenario
        ORDER BY scenario
    """),
    "vw_residual_summary": ("fact_residuals", """
        CREATE OR REPLACE VIEW vw_residual_summary AS
        SELECT
            identity,
            n,
            COUNT(*) AS nodes,
            MAX(Linf) AS max_Linf,
            MAX(L2) AS max_L2
        FROM fact_residuals
        GROUP BY identity, n
        ORDER BY identity, n
    """),
    "vw_probe_slopes": ("fact_probes", """
        CREATE OR REPLACE VIEW vw_probe_slopes AS
        SELECT
            estimate,
            d,
            MIN(k) AS k_min,
            MAX(k) AS k_max,
            MAX(slope) AS slope,
            MAX(max_ratio) AS worst_ratio,
            MAX(ensemble) AS ensemble
        FROM fact_probes
        GROUP BY estimate, d
        ORDER BY estimate
    """),
}


def create_views(con: duckdb.DuckDBPyConnection, available: Iterable[str]) -> List[str]:
    """Create every view whose source table is present."""
    available = set(available)
    created = []
    for name, (source, sql) in VIEWS.items():
        if source in available:
            con.execute(sql)
            created.append(name)
            print(f"Created view: {name}")
    return created


def query_duckdb(db_path: str, query: str) -> pd.DataFrame:
    """Run a read-only query and return a DataFrame."""
    with duckdb.connect(str(db_path), read_only=True) as con:
        return con.execute(query).df()
