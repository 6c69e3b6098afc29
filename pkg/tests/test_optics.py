import numpy as np
import pytest

from ghostpixel.hadamard import make_basis
from ghostpixel.optics import (
    ImperfectionModel,
    NoiseModel,
    Phantom,
    SourceModel,
    acquire_speckle,
    bucket_measure,
    exposure_rng,
    gaussian_blur,
    random_speckle_patterns,
    render_intensity,
    render_mask,
    run_acquisition,
    shift_zero_pad,
    source_blur,
)


def blur_oracle(image, sigma):
    """Independent separable blur: explicit kernel, explicit zero-padded loops."""
    radius = int(np.floor(3.0 * sigma))
    x = np.arange(-radius, radius + 1, dtype=float)
    k = np.exp(-0.5 * (x / sigma) ** 2)
    k /= k.sum()
    padded = np.pad(image, radius)
    rows = np.zeros_like(padded)
    for j in range(radius, padded.shape[1] - radius):
        rows[:, j] = padded[:, j - radius:j + radius + 1] @ k
    out = np.zeros_like(padded)
    for i in range(radius, padded.shape[0] - radius):
        out[i, :] = k @ rows[i - radius:i + radius + 1, :]
    return out[radius:-radius, radius:-radius]


# ---------------------------------------------------------------- render_mask

def test_render_opaque_pixel_leaks_quarter():
    # modulation depth ratio 75%: a blocked pixel still passes 25%
    imp = ImperfectionModel(modulation_depth=0.75)
    out = render_mask(np.array([[0, 1], [1, 0]]), imp)
    assert out[0, 0] == 0.25
    assert out[0, 1] == 1.0


def test_render_ideal_mask_is_identity():
    pattern = (np.arange(64).reshape(8, 8) % 3 == 0).astype(int)
    out = render_mask(pattern, ImperfectionModel())
    np.testing.assert_array_equal(out, pattern.astype(float))


def test_render_checkerboard_with_blur_stays_in_band():
    imp = ImperfectionModel(modulation_depth=0.83, edge_blur_sigma=1.0)
    yy, xx = np.mgrid[0:16, 0:16]
    checker = ((yy + xx) % 2).astype(int)
    out = render_mask(checker, imp)
    interior = out[4:-4, 4:-4]
    assert interior.min() > 0.17
    assert interior.max() < 1.0


def test_render_blur_matches_convolution_oracle():
    imp = ImperfectionModel(modulation_depth=0.83, edge_blur_sigma=1.0)
    rng = np.random.default_rng(5)
    pattern = (rng.random((12, 12)) > 0.5).astype(int)
    out = render_mask(pattern, imp)
    gray = 0.17 + 0.83 * pattern.astype(float)
    np.testing.assert_allclose(out, blur_oracle(gray, 1.0), atol=1e-12)


def test_render_rejects_non_binary():
    with pytest.raises(ValueError):
        render_mask(np.array([[0.0, 0.5], [1.0, 0.0]]), ImperfectionModel())


def test_render_intensity_is_affine_when_unblurred():
    imp = ImperfectionModel(modulation_depth=0.6)
    gray = np.linspace(0, 1, 16).reshape(4, 4)
    np.testing.assert_allclose(render_intensity(gray, imp), 0.4 + 0.6 * gray, atol=1e-15)


def test_imperfection_model_validation():
    with pytest.raises(ValueError):
        ImperfectionModel(modulation_depth=1.2)
    with pytest.raises(ValueError):
        ImperfectionModel(edge_blur_sigma=-0.1)


# ---------------------------------------------------------------- source blur

def test_source_fwhm_pixel_conversion():
    # 37x30 um source, symmetric 100 mm / 100 mm geometry, 10 um pixels
    src = SourceModel(source_fwhm=(37.0, 30.0), source_to_mask=100.0, mask_to_object=100.0)
    assert src.fwhm_pixels(10.0) == (3.7, 3.0)


def test_source_blur_contact_limit_is_identity():
    src = SourceModel(source_fwhm=(37.0, 30.0), source_to_mask=100.0, mask_to_object=1e-6)
    img = np.random.default_rng(0).random((8, 8))
    np.testing.assert_array_equal(source_blur(img, src, 10.0), img)


def test_source_blur_delta_kernel_is_normalized():
    src = SourceModel(source_fwhm=(30.0, 30.0), source_to_mask=100.0, mask_to_object=100.0)
    img = np.zeros((33, 33))
    img[16, 16] = 1.0
    out = source_blur(img, src, 10.0)
    assert abs(out.sum() - 1.0) < 1e-9


def test_source_model_validation():
    with pytest.raises(ValueError):
        SourceModel(source_fwhm=(0.0, 30.0), source_to_mask=100.0, mask_to_object=100.0)
    with pytest.raises(ValueError):
        SourceModel(source_fwhm=(30.0, 30.0), source_to_mask=-1.0, mask_to_object=100.0)


def test_blur_conserves_mass_away_from_boundary():
    rng = np.random.default_rng(3)
    inner = rng.random((10, 10))
    img = np.pad(inner, 6)  # margin > 3*sigma keeps all mass in frame
    for sigma in (0.8, 1.5):
        out = gaussian_blur(img, sigma)
        assert abs(out.sum() - img.sum()) < 1e-6


# ------------------------------------------------------------- bucket_measure

def test_bucket_plain_sum():
    ph = Phantom(np.ones((2, 2)))
    assert bucket_measure(np.ones((2, 2)), ph, NoiseModel(), 0) == 4.0


def test_bucket_dark_floor():
    ph = Phantom(np.zeros((4, 4)))
    noise = NoiseModel(dark_current=0.1)
    assert bucket_measure(np.ones((4, 4)), ph, noise, 0) == pytest.approx(0.1, abs=1e-15)


def test_bucket_matches_loop_oracle():
    rng = np.random.default_rng(8)
    pattern = rng.random((8, 8))
    trans = rng.random((8, 8))
    expected = 0.0
    for i in range(8):
        for j in range(8):
            expected += pattern[i, j] * trans[i, j]
    got = bucket_measure(pattern, Phantom(trans), NoiseModel(), 0)
    assert abs(got - expected) < 1e-12


def test_bucket_shape_mismatch():
    with pytest.raises(ValueError):
        bucket_measure(np.ones((4, 4)), Phantom(np.ones((8, 8))), NoiseModel(), 0)


def test_bucket_linearity_in_phantom():
    rng = np.random.default_rng(4)
    pattern = rng.random((8, 8))
    t1, t2 = rng.random((8, 8)), rng.random((8, 8))
    a, b = 0.3, 0.55
    noise = NoiseModel()
    combined = bucket_measure(pattern, Phantom(a * t1 + b * t2), noise, 0)
    parts = a * bucket_measure(pattern, Phantom(t1), noise, 0) + b * bucket_measure(pattern, Phantom(t2), noise, 0)
    assert abs(combined - parts) < 1e-9


def test_bucket_energy_ordering_leaky_mask_passes_more():
    rng = np.random.default_rng(9)
    trans = rng.random((8, 8))
    for _ in range(10):
        pattern = (rng.random((8, 8)) > 0.5).astype(int)
        leaky = bucket_measure(render_mask(pattern, ImperfectionModel(modulation_depth=0.75)),
                               Phantom(trans), NoiseModel(), 0)
        ideal = bucket_measure(render_mask(pattern, ImperfectionModel()),
                               Phantom(trans), NoiseModel(), 0)
        assert leaky >= ideal


def test_bucket_poisson_concentrates_at_high_flux():
    ph = Phantom(np.full((4, 4), 0.5))
    noise = NoiseModel(photon_scale=1e9, seed=1)
    val = bucket_measure(np.ones((4, 4)), ph, noise, 0)
    assert abs(val - 8.0) / 8.0 < 1e-3


def test_bucket_noise_replays_per_exposure_index():
    ph = Phantom(np.full((4, 4), 0.5))
    noise = NoiseModel(photon_scale=100.0, read_noise_sigma=0.2, seed=42)
    a = bucket_measure(np.ones((4, 4)), ph, noise, 7)
    b = bucket_measure(np.ones((4, 4)), ph, noise, 7)
    c = bucket_measure(np.ones((4, 4)), ph, noise, 8)
    assert a == b
    assert a != c


def test_exposure_rng_tag_streams_are_distinct():
    same = exposure_rng(1, 2, 0).random(4)
    again = exposure_rng(1, 2, 0).random(4)
    other_tag = exposure_rng(1, 2, 1).random(4)
    np.testing.assert_array_equal(same, again)
    assert not np.array_equal(same, other_tag)


# -------------------------------------------------------------------- shifts

def test_shift_zero_pad_against_manual():
    img = np.arange(16.0).reshape(4, 4)
    out = shift_zero_pad(img, 1, -2)
    expected = np.zeros((4, 4))
    expected[1:, :2] = img[:3, 2:]
    np.testing.assert_array_equal(out, expected)
    np.testing.assert_array_equal(shift_zero_pad(img, 0, 0), img)
    assert shift_zero_pad(img, 4, 0).sum() == 0.0


# ------------------------------------------------------------ run_acquisition

def test_acquisition_first_pattern_is_open_frame():
    basis = make_basis(3)
    ph = Phantom(np.random.default_rng(2).random((8, 8)))
    series = run_acquisition(basis, [0], ph, ImperfectionModel(), None, NoiseModel(), False)
    assert len(series) == 1
    assert series.bucket_plus[0] == pytest.approx(ph.transmission.sum(), rel=1e-12)
    assert series.bucket_minus is None


def test_acquisition_full_basis_record_count():
    # full 32x32 basis acquires 1024 records
    basis = make_basis(5)
    ph = Phantom(np.zeros((32, 32)))
    series = run_acquisition(basis, np.arange(1024), ph, ImperfectionModel(), None, NoiseModel(), True)
    assert len(series) == 1024
    assert series.bucket_minus is not None


def test_acquisition_replays_bit_for_bit():
    basis = make_basis(3)
    ph = Phantom(np.random.default_rng(1).random((8, 8)))
    imp = ImperfectionModel(modulation_depth=0.8, edge_blur_sigma=0.5, jitter_sigma=1.0)
    noise = NoiseModel(photon_scale=1e4, read_noise_sigma=0.05, seed=77)
    first = run_acquisition(basis, np.arange(64), ph, imp, None, noise, True)
    second = run_acquisition(basis, np.arange(64), ph, imp, None, noise, True)
    np.testing.assert_array_equal(first.bucket_plus, second.bucket_plus)
    np.testing.assert_array_equal(first.bucket_minus, second.bucket_minus)


def test_acquisition_seed_changes_noise():
    basis = make_basis(3)
    ph = Phantom(np.random.default_rng(1).random((8, 8)))
    noise_a = NoiseModel(photon_scale=1e4, seed=0)
    noise_b = NoiseModel(photon_scale=1e4, seed=1)
    a = run_acquisition(basis, np.arange(64), ph, ImperfectionModel(), None, noise_a, False)
    b = run_acquisition(basis, np.arange(64), ph, ImperfectionModel(), None, noise_b, False)
    assert not np.array_equal(a.bucket_plus, b.bucket_plus)


def test_acquisition_size_mismatch_rejected():
    basis = make_basis(3)
    with pytest.raises(ValueError):
        run_acquisition(basis, [0], Phantom(np.ones((16, 16))), ImperfectionModel(),
                        None, NoiseModel(), False)
    with pytest.raises(ValueError):
        run_acquisition(basis, [64], Phantom(np.ones((8, 8))), ImperfectionModel(),
                        None, NoiseModel(), False)


def test_phantom_validation():
    with pytest.raises(ValueError):
        Phantom(np.full((4, 4), 1.5))
    with pytest.raises(ValueError):
        Phantom(np.ones((4, 5)))
    with pytest.raises(ValueError):
        Phantom(np.ones((4, 4)), pixel_pitch=0.0)


# ------------------------------------------------------------------- speckle

def test_speckle_single_cell_is_constant():
    pats = random_speckle_patterns(8, 3, 8, seed=0)
    for p in pats:
        assert p.max() == p.min()


def test_speckle_values_bounded_and_deterministic():
    a = random_speckle_patterns(16, 10, 2, seed=5)
    b = random_speckle_patterns(16, 10, 2, seed=5)
    np.testing.assert_array_equal(a, b)
    assert a.min() >= 0.0 and a.max() <= 1.0
    c = random_speckle_patterns(16, 10, 2, seed=6)
    assert not np.array_equal(a, c)


def test_speckle_mean_field_flattens():
    # ensemble mean per pixel converges to a constant field
    pats = random_speckle_patterns(16, 5000, 1, seed=3)
    assert pats.mean(axis=0).std() < 0.05


def test_speckle_unit_cells_are_uncorrelated_neighbors():
    pats = random_speckle_patterns(32, 200, 1, seed=1)
    left = pats[:, :, :-1].ravel()
    right = pats[:, :, 1:].ravel()
    r = np.corrcoef(left, right)[0, 1]
    assert abs(r) < 0.1


def test_speckle_parameter_validation():
    with pytest.raises(ValueError):
        random_speckle_patterns(8, 0, 1, seed=0)
    with pytest.raises(ValueError):
        random_speckle_patterns(8, 1, 9, seed=0)


def test_acquire_speckle_series_shape():
    ph = Phantom(np.random.default_rng(0).random((16, 16)))
    pats = random_speckle_patterns(16, 12, 2, seed=4)
    series = acquire_speckle(pats, ph, ImperfectionModel(modulation_depth=0.75),
                             None, NoiseModel(seed=4), speckle_size_px=2)
    assert series.modulation == "speckle"
    assert len(series) == 12
    assert series.bucket_minus is None
    np.testing.assert_array_equal(series.indices, np.arange(12))
