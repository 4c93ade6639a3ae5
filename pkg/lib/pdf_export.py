# ─────────────────────────────────────────────────────────────────────────────
# Run report PDF: configuration, metrics, discovered equations, noise recovery
# ─────────────────────────────────────────────────────────────────────────────

import logging
from pathlib import Path

from fpdf import FPDF

logger = logging.getLogger(__name__)


class RunReportPDF(FPDF):
    """Plain text-and-table report of one pipeline run."""

    def __init__(self, run_name="run"):
        super().__init__("P", "mm", "Letter")
        self.run_name = run_name
        self._setup_fonts()

    def _setup_fonts(self):
        """Try to use DejaVu for unicode symbols, fall back to Helvetica."""
        dejavu_path = Path("/usr/share/fonts/truetype/dejavu")
        if (dejavu_path / "DejaVuSans.ttf").exists():
            self.add_font("DejaVu", "", str(dejavu_path / "DejaVuSans.ttf"))
            self.add_font("DejaVu", "B", str(dejavu_path / "DejaVuSans-Bold.ttf"))
            self._font_family = "DejaVu"
        else:
            self._font_family = "Helvetica"

    def text_safe(self, txt):
        if self._font_family == "DejaVu":
            return txt
        return txt.encode("latin-1", "replace").decode("latin-1")

    def header(self):
        if self.page_no() > 1:
            self.set_font(self._font_family, "B", 9)
            self.set_text_color(107, 114, 128)
            self.cell(0, 8, self.text_safe(f"Robust SINDy autoencoder | {self.run_name}"), align="L")
            self.ln(10)

    def footer(self):
        self.set_y(-15)
        self.set_font(self._font_family, "", 8)
        self.set_text_color(156, 163, 175)
        self.cell(0, 10, f"Page {self.page_no()}", align="C")

    def section_title(self, title):
        self.set_font(self._font_family, "B", 14)
        self.set_text_color(37, 99, 235)
        self.cell(0, 10, self.text_safe(title), new_x="LMARGIN", new_y="NEXT")
        self.set_draw_color(37, 99, 235)
        self.line(self.get_x(), self.get_y(), self.get_x() + 60, self.get_y())
        self.ln(4)

    def body_text(self, txt):
        self.set_font(self._font_family, "", 10)
        self.set_text_color(55, 65, 81)
        self.multi_cell(0, 5, self.text_safe(txt.replace("**", "")))
        self.ln(2)

    def key_value(self, key, value):
        self.set_font(self._font_family, "B", 10)
        self.set_text_color(55, 65, 81)
        label = self.text_safe(key + ":  ")
        self.cell(self.get_string_width(label), 5, label)
        self.set_font(self._font_family, "", 10)
        self.cell(0, 5, self.text_safe(str(value)), new_x="LMARGIN", new_y="NEXT")

    def equation_block(self, lines):
        self.set_font("Courier", "", 8)
        self.set_text_color(17, 24, 39)
        for line in lines:
            self.multi_cell(0, 4, line.encode("latin-1", "replace").decode("latin-1"))
        self.ln(3)


def generate_run_pdf(config, metrics, equations, transformed_equations=None,
                     noise_text=None, narrative=None, run_name="run"):
    """Build the report and return it as bytes."""
    pdf = RunReportPDF(run_name)
    pdf.set_auto_page_break(auto=True, margin=20)

    # ── Cover ─────────────────────────────────────────────────────────────
    pdf.add_page()
    pdf.ln(20)
    pdf.set_font(pdf._font_family, "B", 22)
    pdf.set_text_color(37, 99, 235)
    pdf.cell(0, 12, "Robust SINDy Autoencoder", new_x="LMARGIN", new_y="NEXT", align="C")
    pdf.set_font(pdf._font_family, "", 13)
    pdf.set_text_color(107, 114, 128)
    pdf.cell(0, 8, pdf.text_safe(f"Run report: {run_name}"), new_x="LMARGIN", new_y="NEXT", align="C")
    pdf.ln(10)
    if narrative:
        pdf.body_text(narrative)

    # ── Metrics ───────────────────────────────────────────────────────────
    pdf.section_title("Test-set metrics")
    pdf.set_font(pdf._font_family, "B", 9)
    pdf.set_fill_color(243, 244, 246)
    col_widths = [110, 50]
    for w, h in zip(col_widths, ["Metric", "Relative error"]):
        pdf.cell(w, 7, h, border=1, fill=True, align="C")
    pdf.ln()
    pdf.set_font(pdf._font_family, "", 9)
    for name, value in metrics.items():
        pdf.cell(col_widths[0], 6, name, border=1)
        pdf.cell(col_widths[1], 6, f"{value:.6f}", border=1, align="C")
        pdf.ln()
    pdf.ln(6)

    # ── Equations ─────────────────────────────────────────────────────────
    pdf.section_title("Discovered latent model")
    pdf.equation_block(equations)
    if transformed_equations:
        pdf.section_title("After affine alignment with the reference")
        pdf.equation_block(transformed_equations)
    if noise_text:
        pdf.section_title("Noise recovery")
        pdf.body_text(noise_text)

    # ── Configuration ─────────────────────────────────────────────────────
    pdf.add_page()
    pdf.section_title("Resolved configuration")
    for key in sorted(config):
        pdf.key_value(f"  {key}", config[key])

    return bytes(pdf.output())


def write_run_pdf(path, **kwargs):
    data = generate_run_pdf(**kwargs)
    Path(path).write_bytes(data)
    logger.info("report written to %s", path)
