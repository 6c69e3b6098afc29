"""On-disk formats: binary PGM images, lossless float-text matrices,
measurement-series files, and key=value diagnostics sidecars.

Everything here is deterministic text or fixed-endianness binary so that
identical inputs produce byte-identical files on any platform.  Floats in
text formats use 17 significant digits, enough to round-trip IEEE doubles.
"""

import numpy as np

from .optics import ImperfectionModel, MeasurementSeries, NoiseModel, SourceModel

PGM_MAXVAL = 65535


class FormatError(ValueError):
    """A file exists but does not parse as the expected format."""


def format_float(x: float, sig: int = 17) -> str:
    return f"{float(x):.{sig}g}"


# ------------------------------------------------------------------ PGM (P5)

def save_pgm(path, image: np.ndarray) -> None:
    """16-bit binary PGM, big-endian, maxval 65535; expects values in [0,1]."""
    img = np.asarray(image, dtype=np.float64)
    if img.ndim != 2:
        raise ValueError("PGM wants a 2D image")
    if img.min() < 0.0 or img.max() > 1.0:
        raise ValueError("PGM image values must be within [0, 1]; normalize first")
    quantized = np.rint(img * PGM_MAXVAL).astype(">u2")
    header = f"P5\n{img.shape[1]} {img.shape[0]}\n{PGM_MAXVAL}\n"
    with open(path, "wb") as fh:
        fh.write(header.encode("ascii"))
        fh.write(quantized.tobytes())


def load_pgm(path) -> np.ndarray:
    """Read a binary PGM back to floats in [0, 1]."""
    with open(path, "rb") as fh:
        data = fh.read()
    fields = []
    pos = 0
    while len(fields) < 4:
        while pos < len(data) and data[pos:pos + 1].isspace():
            pos += 1
        if data[pos:pos + 1] == b"#":
            while pos < len(data) and data[pos:pos + 1] != b"\n":
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos:pos + 1].isspace():
            pos += 1
        if pos == start:
            raise FormatError(f"{path}: truncated PGM header")
        fields.append(data[start:pos])
    pos += 1  # single whitespace after maxval
    if fields[0] != b"P5":
        raise FormatError(f"{path}: not a binary PGM (magic {fields[0]!r})")
    width, height, maxval = (int(f) for f in fields[1:])
    if maxval != PGM_MAXVAL:
        raise FormatError(f"{path}: expected maxval {PGM_MAXVAL}, found {maxval}")
    expected = width * height * 2
    payload = data[pos:pos + expected]
    if len(payload) != expected:
        raise FormatError(f"{path}: PGM payload is {len(payload)} bytes, wanted {expected}")
    raw = np.frombuffer(payload, dtype=">u2").reshape(height, width)
    return raw.astype(np.float64) / PGM_MAXVAL


# ------------------------------------------------------------ float matrices

def save_float_matrix(path, matrix: np.ndarray) -> None:
    """Plain-text matrix, one row per line, lossless 17-digit floats."""
    mat = np.atleast_2d(np.asarray(matrix, dtype=np.float64))
    with open(path, "w") as fh:
        for row in mat:
            fh.write(" ".join(format_float(v) for v in row))
            fh.write("\n")


def load_float_matrix(path) -> np.ndarray:
    rows = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            try:
                rows.append([float(tok) for tok in line.split()])
            except ValueError as exc:
                raise FormatError(f"{path}: bad float row: {exc}") from None
    if not rows:
        raise FormatError(f"{path}: empty matrix file")
    if len({len(r) for r in rows}) != 1:
        raise FormatError(f"{path}: ragged rows")
    return np.array(rows, dtype=np.float64)


# ------------------------------------------------------------- diagnostics

def save_diagnostics(path, entries: dict) -> None:
    """key=value sidecar; floats at 17 digits, everything else via str."""
    with open(path, "w") as fh:
        for key, value in entries.items():
            if isinstance(value, float):
                value = format_float(value)
            fh.write(f"{key}={value}\n")


def load_diagnostics(path) -> dict:
    out = {}
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise FormatError(f"{path}: expected key=value, got {line!r}")
            key, _, value = line.partition("=")
            out[key.strip()] = value.strip()
    return out


# --------------------------------------------------------- measurement series

def save_series(series: MeasurementSeries, path) -> None:
    """Line format: `# key=value` headers, then `index,plus[,minus]` records."""
    imp = series.imperfection
    noise = series.noise
    lines = [
        f"# modulation={series.modulation}",
        f"# n={series.n}",
        f"# basis_k={series.basis_k}",
        f"# ordering={series.ordering}",
        f"# differential={int(series.differential)}",
        f"# speckle_size_px={series.speckle_size_px}",
        f"# pixel_pitch={format_float(series.pixel_pitch)}",
        f"# modulation_depth={format_float(imp.modulation_depth)}",
        f"# edge_blur_sigma={format_float(imp.edge_blur_sigma)}",
        f"# jitter_sigma={format_float(imp.jitter_sigma)}",
        f"# photon_scale={format_float(noise.photon_scale)}",
        f"# read_noise_sigma={format_float(noise.read_noise_sigma)}",
        f"# dark_current={format_float(noise.dark_current)}",
        f"# seed={noise.seed}",
    ]
    if series.source is not None:
        src = series.source
        lines += [
            f"# source_fwhm={format_float(src.source_fwhm[0])},{format_float(src.source_fwhm[1])}",
            f"# source_to_mask={format_float(src.source_to_mask)}",
            f"# mask_to_object={format_float(src.mask_to_object)}",
        ]
    with open(path, "w") as fh:
        fh.write("\n".join(lines))
        fh.write("\n")
        for t in range(len(series)):
            rec = f"{series.indices[t]},{format_float(series.bucket_plus[t])}"
            if series.differential:
                rec += f",{format_float(series.bucket_minus[t])}"
            fh.write(rec + "\n")


def load_series(path) -> MeasurementSeries:
    header = {}
    records = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                body = line[1:].strip()
                if "=" not in body:
                    raise FormatError(f"{path}: malformed header line {line!r}")
                key, _, value = body.partition("=")
                header[key.strip()] = value.strip()
            else:
                records.append(line)
    required = ("modulation", "n", "differential", "seed")
    for key in required:
        if key not in header:
            raise FormatError(f"{path}: missing header key {key!r}")
    try:
        differential = bool(int(header["differential"]))
        n = int(header["n"])
        imp = ImperfectionModel(
            modulation_depth=float(header.get("modulation_depth", 1.0)),
            edge_blur_sigma=float(header.get("edge_blur_sigma", 0.0)),
            jitter_sigma=float(header.get("jitter_sigma", 0.0)),
        )
        noise = NoiseModel(
            photon_scale=float(header.get("photon_scale", 0.0)),
            read_noise_sigma=float(header.get("read_noise_sigma", 0.0)),
            dark_current=float(header.get("dark_current", 0.0)),
            seed=int(header["seed"]),
        )
        source = None
        if "source_fwhm" in header:
            f0, f1 = (float(v) for v in header["source_fwhm"].split(","))
            source = SourceModel(
                source_fwhm=(f0, f1),
                source_to_mask=float(header["source_to_mask"]),
                mask_to_object=float(header["mask_to_object"]),
            )
    except (ValueError, KeyError) as exc:
        raise FormatError(f"{path}: bad header value: {exc}") from None
    if not records:
        raise FormatError(f"{path}: series has no records")
    want = 3 if differential else 2
    indices = np.empty(len(records), dtype=np.int64)
    plus = np.empty(len(records))
    minus = np.empty(len(records)) if differential else None
    for t, rec in enumerate(records):
        parts = rec.split(",")
        if len(parts) != want:
            raise FormatError(f"{path}: record {t} has {len(parts)} fields, wanted {want}")
        try:
            indices[t] = int(parts[0])
            plus[t] = float(parts[1])
            if differential:
                minus[t] = float(parts[2])
        except ValueError as exc:
            raise FormatError(f"{path}: record {t} malformed: {exc}") from None
    return MeasurementSeries(
        n=n, modulation=header["modulation"], differential=differential,
        indices=indices, bucket_plus=plus, bucket_minus=minus,
        imperfection=imp, source=source, noise=noise,
        pixel_pitch=float(header.get("pixel_pitch", 1.0)),
        basis_k=int(header.get("basis_k", 0)),
        ordering=header.get("ordering", "natural"),
        speckle_size_px=int(header.get("speckle_size_px", 1)),
    )
