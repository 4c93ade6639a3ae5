import numpy as np

from lib.dynamics import lorenz_ground_truth_coefficients
from lib.evaluation import AffineLatentTransform, Metrics
from lib.narratives import format_equations, narr_metrics, narr_noise, narr_sparsity, narr_transform
from lib.pdf_export import generate_run_pdf, write_run_pdf
from lib.presets import DEFAULTS
from lib.sindy import SindyCoefficients, SindySpec


def lorenz_coefficients():
    Xi = lorenz_ground_truth_coefficients([1.0, 1.0, 1.0])
    return SindyCoefficients(Xi, Xi != 0)


def test_lorenz_equations():
    lines = format_equations(lorenz_coefficients(), SindySpec(latent_dim=3))
    assert lines == [
        "dz1 = -10 z1 + 10 z2",
        "dz2 = 28 z1 - 1 z2 - 1 z1 z3",
        "dz3 = -2.667 z3 + 1 z1 z2",
    ]


def test_empty_equation_and_powers():
    spec = SindySpec(latent_dim=1, poly_order=3)
    phi = np.array([[0.5], [0.0], [0.0], [-2.0]])
    assert format_equations(SindyCoefficients(phi, phi != 0), spec) == ["dz1 = 0.5 - 2 z1^3"]
    assert format_equations(SindyCoefficients(phi, np.zeros_like(phi, dtype=bool)), spec) == ["dz1 = 0"]


def test_second_order_equation_names():
    spec = SindySpec(latent_dim=1, poly_order=1, include_constant=False, model_order=2)
    phi = np.array([[-1.0], [0.0]])
    assert format_equations(SindyCoefficients(phi, phi != 0), spec) == ["ddz1 = -1 z1"]


def test_summaries():
    text = narr_metrics(Metrics(0.0156, 0.1011, 0.0625), 0.10)
    assert "10%" in text and "0.1011" in text
    assert "matches the true system" in narr_sparsity(lorenz_coefficients(), 7)
    assert "2 more" in narr_sparsity(SindyCoefficients(np.ones((3, 3)), np.ones((3, 3), dtype=bool)), 7)
    T = AffineLatentTransform([1.0, -0.917], [0.0, -2.665], (0, 1))
    assert "- 2.665" in narr_transform(T)
    assert "closely tracks" in narr_noise({"correlation": 0.95, "relative_l2": 0.3, "interior_columns": 10})


def test_report_pdf(tmp_path):
    lines = format_equations(lorenz_coefficients(), SindySpec(latent_dim=3))
    data = generate_run_pdf(
        config=DEFAULTS, metrics=Metrics(0.01, 0.1, 0.06).as_dict(), equations=lines,
        transformed_equations=lines, noise_text="correlation **0.95**", narrative="z̃ ≈ α z", run_name="unit",
    )
    assert data.startswith(b"%PDF")
    write_run_pdf(tmp_path / "r.pdf", config={"seed": 0}, metrics={}, equations=["dz1 = 0"])
    assert (tmp_path / "r.pdf").read_bytes().startswith(b"%PDF")
