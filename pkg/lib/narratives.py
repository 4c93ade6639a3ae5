# ─────────────────────────────────────────────────────────────────────────────
# Human-readable text: discovered equations and run summaries
# ─────────────────────────────────────────────────────────────────────────────

from lib.sindy import equation_names, library_terms, term_name, variable_names


def _pretty_term(term, names):
    kind, idx = term
    if kind == "poly":
        parts = []
        for v in sorted(set(idx)):
            power = idx.count(v)
            parts.append(names[v] if power == 1 else f"{names[v]}^{power}")
        return " ".join(parts)
    return term_name(term, names)


def format_equations(coeffs, spec, precision=4):
    """One line per latent equation, e.g. 'dz1 = -10.02 z1 + 10.05 z2'."""
    names = variable_names(spec)
    terms = library_terms(spec.effective_dim, spec.poly_order, spec.include_sine, spec.include_constant)
    Xi = coeffs.masked
    lines = []
    for i, lhs in enumerate(equation_names(spec)):
        pieces = []
        for k, term in enumerate(terms):
            c = Xi[k, i]
            if c == 0:
                continue
            label = _pretty_term(term, names)
            value = f"{abs(c):.{precision}g}"
            body = value if label == "1" else f"{value} {label}"
            sign = "-" if c < 0 else "+"
            pieces.append((sign, body))
        if not pieces:
            rhs = "0"
        else:
            first_sign, first = pieces[0]
            rhs = ("-" if first_sign == "-" else "") + first
            rhs += "".join(f" {s} {b}" for s, b in pieces[1:])
        lines.append(f"{lhs} = {rhs}")
    return lines


def narr_metrics(metrics, noise_level):
    m = metrics.as_dict()
    return (
        f"At **{noise_level:.0%}** measurement noise the autoencoder reconstructs the "
        f"test inputs with a relative error of **{m['decoder_relative_error']:.4f}**. "
        f"Decoded SINDy derivatives miss the measured ones by "
        f"**{m['decoder_sindy_relative_error']:.4f}**, and the latent model "
        f"matches the encoded derivatives to **{m['latent_sindy_relative_error']:.4f}**."
    )


def narr_sparsity(coeffs, ground_truth_active=None):
    active = coeffs.active_count
    total = coeffs.mask.size
    text = f"Thresholding kept **{active}** of {total} library coefficients."
    if ground_truth_active is not None:
        extra = active - ground_truth_active
        if extra > 0:
            text += f" That is {extra} more than the {ground_truth_active} terms of the true system."
        elif extra == 0:
            text += " The count matches the true system."
        else:
            text += f" The true system needs {ground_truth_active}, so some terms were lost."
    return text


def narr_transform(T):
    parts = [
        f"z{i + 1} = {a:.4g}·z̃{p + 1}" + (f" {'+' if b >= 0 else '-'} {abs(b):.4g}" if b else "")
        for i, (a, b, p) in enumerate(zip(T.scale, T.offset, T.permutation))
    ]
    return "Latent coordinates align with the reference as " + ", ".join(parts) + f" (residual {T.residual:.2e})."


def narr_noise(report):
    corr = report["correlation"]
    quality = "closely tracks" if corr >= 0.9 else "partially tracks" if corr >= 0.5 else "does not track"
    return (
        f"The learned measurement error {quality} the injected noise: correlation "
        f"**{corr:.3f}**, relative l2 error **{report['relative_l2']:.3f}** over "
        f"{report['interior_columns']} interior samples."
    )
