from __future__ import annotations

import io
import re
from pathlib import Path

import numpy as np
import pandas as pd

from .errors import DataError, at_line

MISSING = "?"
EMBEDDING_FALLBACK = "*"


def parse_songs(path: str) -> pd.DataFrame:
    """Parse `song_id,artist_id,release_year[,<metadata...>]` into typed columns."""
    df, lines = _read_table(path, header=True)
    required = ["song_id", "artist_id", "release_year"]
    if list(df.columns[:3]) != required:
        raise DataError(at_line(path, lines.header, f"header must start with {','.join(required)}"))

    out = pd.DataFrame(
        {
            "song_id": df["song_id"].str.strip(),
            "artist_id": df["artist_id"].str.strip(),
            "line": lines.rows,
        }
    )
    _require_nonempty(out, ["song_id", "artist_id"], path)

    years = []
    for value, line in zip(df["release_year"], lines.rows):
        try:
            years.append(int(str(value).strip()))
        except ValueError:
            raise DataError(at_line(path, line, f"release_year must be an integer, got {value!r}")) from None
    out["release_year"] = np.asarray(years, dtype=np.int64)

    for col in df.columns[3:]:
        out[col] = _numeric_column(df[col], lines.rows, path, col)
    return out


def parse_playlists(path: str) -> pd.DataFrame:
    """Parse `playlist_id,user_id,song_1;song_2;...` rows (header line optional)."""
    df, lines = _read_table(path, header=False)
    if df.shape[1] != 3:
        raise DataError(at_line(path, None, f"expected 3 comma-separated fields, found {df.shape[1]}"))
    df.columns = ["playlist_id", "user_id", "songs"]
    keep = np.ones(len(df), dtype=bool)
    if len(df) and str(df.iloc[0]["playlist_id"]).strip() == "playlist_id":
        keep[0] = False
    df = df[keep].reset_index(drop=True)
    rows = [line for line, k in zip(lines.rows, keep) if k]

    out = pd.DataFrame(
        {
            "playlist_id": df["playlist_id"].str.strip(),
            "user_id": df["user_id"].str.strip(),
            "line": rows,
        }
    )
    _require_nonempty(out, ["playlist_id", "user_id"], path)
    members = []
    for value, line in zip(df["songs"], rows):
        songs = [s.strip() for s in str(value).split(";") if s.strip()] if pd.notna(value) else []
        if not songs:
            raise DataError(at_line(path, line, "playlist has no songs"))
        members.append(songs)
    out["songs"] = members
    return out


def parse_users(path: str) -> pd.DataFrame:
    """Parse `user_id,<attribute columns...>`; `?` marks a missing value."""
    df, lines = _read_table(path, header=True)
    if df.columns[0] != "user_id":
        raise DataError(at_line(path, lines.header, "header must start with user_id"))
    out = pd.DataFrame({"user_id": df["user_id"].str.strip(), "line": lines.rows})
    _require_nonempty(out, ["user_id"], path)
    for col in df.columns[1:]:
        out[col] = _numeric_column(df[col], lines.rows, path, col)
    return out


def parse_genres(path: str) -> pd.DataFrame:
    """Parse `song_id,genre_label` with harmonised labels."""
    df, lines = _read_table(path, header=True)
    if list(df.columns) != ["song_id", "genre_label"]:
        raise DataError(at_line(path, lines.header, "header must be song_id,genre_label"))
    out = pd.DataFrame(
        {
            "song_id": df["song_id"].str.strip(),
            "genre": df["genre_label"].map(normalize_label),
            "line": lines.rows,
        }
    )
    dup = out["song_id"].duplicated()
    if dup.any():
        first = out[dup].iloc[0]
        raise DataError(at_line(path, int(first["line"]), f"duplicate song id {first['song_id']!r}"))
    return out


def parse_embeddings(path: str) -> pd.DataFrame:
    """Parse `artist_id,<floats...>` rows into a frame indexed by artist id."""
    df, lines = _read_table(path, header=False)
    if df.shape[1] < 2:
        raise DataError(at_line(path, None, "embedding rows need an artist id and at least one value"))
    values = np.empty((len(df), df.shape[1] - 1), dtype=np.float64)
    for r, line in enumerate(lines.rows):
        row = df.iloc[r, 1:]
        if row.isna().any() or (row.astype(str).str.strip() == "").any():
            raise DataError(at_line(path, line, "embedding dimension mismatch"))
        try:
            values[r] = row.astype(float).to_numpy()
        except ValueError:
            raise DataError(at_line(path, line, "embedding values must be numeric")) from None
    ids = df.iloc[:, 0].astype(str).str.strip()
    if ids.duplicated().any():
        raise DataError(at_line(path, None, f"duplicate artist id {ids[ids.duplicated()].iloc[0]!r}"))
    if not np.isfinite(values).all():
        raise DataError(at_line(path, None, "embedding values must be finite"))
    cols = [f"emb_{j}" for j in range(values.shape[1])]
    return pd.DataFrame(values, index=pd.Index(ids, name="artist_id"), columns=cols)


def normalize_label(value: object) -> str | None:
    if value is None or (isinstance(value, float) and np.isnan(value)):
        return None
    text = str(value).strip().lower()
    if not text or text == MISSING:
        return None
    text = re.sub(r"[_/]+", " ", text)
    return re.sub(r"\s+", " ", text)


class _Lines:
    def __init__(self, header: int | None, rows: list[int]):
        self.header = header
        self.rows = rows


def _read_table(path: str, header: bool) -> tuple[pd.DataFrame, _Lines]:
    p = Path(path)
    if not p.exists():
        raise DataError(f"file not found: {path}")

    kept: list[str] = []
    numbers: list[int] = []
    for no, raw in enumerate(p.read_text(encoding="utf-8").splitlines(), start=1):
        if not raw.strip() or raw.lstrip().startswith("#"):
            continue
        kept.append(raw)
        numbers.append(no)

    if header and not kept:
        raise DataError(at_line(path, None, "missing header row"))

    try:
        df = pd.read_csv(
            io.StringIO("\n".join(kept)),
            header=0 if header else None,
            dtype=str,
            keep_default_na=False,
            skipinitialspace=True,
        )
    except pd.errors.EmptyDataError:
        df = pd.DataFrame()
    except pd.errors.ParserError as e:
        raise DataError(at_line(path, None, f"malformed row ({e})")) from e

    if header:
        df.columns = [str(c).strip() for c in df.columns]
        return df, _Lines(numbers[0], numbers[1:])
    return df, _Lines(None, numbers)


def _numeric_column(col: pd.Series, lines: list[int], path: str, name: str) -> np.ndarray:
    out = np.empty(len(col), dtype=np.float64)
    for r, (value, line) in enumerate(zip(col, lines)):
        text = "" if pd.isna(value) else str(value).strip()
        if text in (MISSING, ""):
            out[r] = np.nan
            continue
        try:
            out[r] = float(text)
        except ValueError:
            message = f"column {name!r}: expected a number, '?' or an empty cell, got {text!r}"
            raise DataError(at_line(path, line, message)) from None
        if not np.isfinite(out[r]):
            raise DataError(at_line(path, line, f"column {name!r}: value must be finite"))
    return out


def _require_nonempty(df: pd.DataFrame, cols: list[str], path: str) -> None:
    for c in cols:
        bad = df[c].isna() | (df[c] == "")
        if bad.any():
            line = int(df.loc[bad, "line"].iloc[0])
            raise DataError(at_line(path, line, f"empty {c}"))
