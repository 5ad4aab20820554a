"""Closed-form expectations of basis factors under beta transitions.

Run: python3 demos/expectations.py
"""

from scipy import integrate, stats

from hmdp.special import expect_beta_pdf, expect_monomial, expect_pwl, pwl_eval

tent = ((0.3, 0.5, 5.0, -1.5), (0.5, 0.7, -5.0, 3.5))
a, b = 15.0, 8.0  # x' ~ Beta(15, 8)

rows = [
    ("x^4", float(expect_monomial(a, b, 4, 0)), lambda x: x ** 4),
    ("Beta(x | 2, 6)", float(expect_beta_pdf(a, b, 2.0, 6.0)), lambda x: stats.beta.pdf(x, 2, 6)),
    ("tent on [0.3, 0.7]", float(expect_pwl(a, b, tent)), lambda x: float(pwl_eval(x, tent))),
]
print(f"{'factor':<20}{'closed form':>14}{'quadrature':>14}")
for name, closed, f in rows:
    quad, _ = integrate.quad(lambda x: f(x) * stats.beta.pdf(x, a, b), 0, 1,
                             points=[0.3, 0.5, 0.7], epsabs=1e-13)
    print(f"{name:<20}{closed:>14.10f}{quad:>14.10f}")
