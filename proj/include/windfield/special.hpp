#pragma once

namespace windfield {

// Digamma ψ(x) for x > 0: upward recurrence to x ≥ 10, then the asymptotic Bernoulli series.
double digamma(double x);

// log B(a, b) via std::lgamma.
double log_beta(double a, double b);

}  // namespace windfield
