#pragma once

// Coefficients of the cubic in (a+, b+) left after eliminating f, d^2 and the
// minus-sector weights from the i=2 compatibility relation. Templated so the
// tests can evaluate it in exact rationals.

namespace vlab {

template <class T>
CubicCoefficients<T> cubic_coefficients(const T& D, const T& L, const T& P, const T& O, const T& G,
                                        const T& Gm) {
    const T one(1);
    const T two(2);
    const T three(3);
    const T four(4);
    const T L2 = L * L, L3 = L2 * L;
    const T P2 = P * P, P3 = P2 * P;
    const T G2 = G * G, O2 = O * O, O3 = O2 * O, D2 = D * D;

    CubicCoefficients<T> c;
    c.b1 = P * (L2 * Gm * (G - D) + L * P * (D * G + Gm * G - G2 + D * O + Gm * O - G * O) -
                P2 * (G2 + D * O + two * G * O + two * O2)) +
           P * (L2 - P2);

    c.b2 = L3 * G * (D + two * Gm - G) + L2 * P * (one - two * D * Gm - D * G + Gm * G - four * G * O) +
           L * P2 *
               (-one - D * Gm + D * G - Gm * G + D2 * Gm * G + D * O + Gm * O - G * O - D2 * G * O -
                D * Gm * G * O + D * G2 * O - O2 - D * G * O2 - two * Gm * G * O2 + G2 * O2) -
           P3 * (one - two * D * G + G2 + D2 * G2 - two * G * O + D * G2 * O + two * O2 -
                 four * D * G * O2 - four * G * O3) +
           L3;

    c.b3 = -L3 * (D + Gm - G) + L2 * P * (Gm + D2 * Gm - G - D * Gm * G + two * O) +
           L * P2 *
               (D + two * Gm - two * G - D2 * G - two * D * Gm * G + D * G2 - O - Gm * G * O + D * O2 +
                Gm * O2 - G * O2) +
           P3 * (two * D * G2 - three * O + four * D * G * O + G2 * O - D * O2 + two * G * O2 - two * O3);

    c.b4 = -L3 * G * (one + Gm * G) + L2 * P * (Gm - G + D * G2 + two * G2 * O) +
           L * P2 *
               (Gm - D * Gm * G + Gm * G2 - O + D * G * O - Gm * G * O + D * Gm * G2 * O + G * O2 +
                Gm * G2 * O2) -
           P3 * (O - two * D * G * O + G2 * O + D2 * G2 * O - two * G * O2 + three * D * G2 * O2 +
                 two * G2 * O3);
    return c;
}

}  // namespace vlab
