#pragma once

namespace erpdeck::stats {

// Regularized incomplete gamma functions P(a, x) and Q(a, x) = 1 - P(a, x),
// series expansion for x < a + 1 and Lentz continued fraction otherwise.
// Absolute tolerance ~1e-14, well inside the documented 1e-10 budget.
double gamma_p(double a, double x);
double gamma_q(double a, double x);

// Regularized incomplete beta I_x(a, b) via continued fraction.
double beta_inc(double a, double b, double x);

// Survival functions built on the above.
double chi2_sf(double x, double dof);
double student_t_sf(double t, double dof);   // one-sided, P(T > t)
double f_sf(double f, double d1, double d2); // P(F > f)
double normal_sf(double z);

}  // namespace erpdeck::stats
