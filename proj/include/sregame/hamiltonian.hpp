#pragma once

#include "sregame/cone.hpp"
#include "sregame/model.hpp"

namespace sregame {

struct HamiltonianEval {
  Mat Rhat, Rhat11, Rhat12, Rhat22;
  Mat Rtilde11, Rtilde22;
  Vec Chat, Chat1, Chat2;
  Vec sigmahat, sigmahat1, sigmahat2;
  // First factorization eliminates v2 (through Rtilde11), the second v1.
  double H1 = 0.0, H2 = 0.0, H3 = 0.0;
  double H1_alt = 0.0, H2_alt = 0.0, H3_alt = 0.0;
};

/// Definiteness requirement on the diagonal blocks of Rhat: Rhat11 <= -margin
/// and Rhat22 >= margin. A margin of 0 only asks for strict definiteness.
HamiltonianEval assemble(double P, const Vec& Lambda, double phi, const Vec& Delta,
                         const NodeCoefficients& c, double margin = 0.0);

/// Cheap H1 only (first factorization), used inside searches.
double h1_value(double P, const Vec& Lambda, const NodeCoefficients& c);

/// Uniform bound 2 (c3 epsbar^2 + cbar2 |Lambda|^2) / epsilon.
double h1_bound(const AssumptionReport& rep, double lambda_norm);

/// Search radius in Lambda used by the truncated Hamiltonian at level k.
double truncation_radius(int k, double lambda_norm, const AssumptionReport& rep);

/// Lipschitz envelope sup {Hhat1(P~, L~) - k|P - P~| - k|Lambda - L~|} with
/// Hhat1 = H1 on |P~| <= epsbar and 0 outside, L~ restricted to the ball of
/// truncation_radius() around Lambda.
double h1_truncated(int k, double P, const Vec& Lambda, const NodeCoefficients& c,
                    const AssumptionReport& rep);

struct ConstrainedHamiltonianEval {
  double f11 = 0.0, f12 = 0.0, f21 = 0.0, f22 = 0.0;
  double Htilde11 = 0.0, Htilde12 = 0.0, Htilde21 = 0.0, Htilde22 = 0.0;
  double Htilde1 = 0.0, Htilde2 = 0.0;
  Vec vhat11, vhat12, vhat21, vhat22;
  Vec betahat11, betahat12, betahat21, betahat22;
  bool certified = false;
};

struct ConstrainedOptions {
  bool certify = true;          // run the nested routes and compare
  double minimax_tol = 1e-8;    // absolute, scaled by max(1, |H|)
  double margin = 0.0;
};

ConeGame cone_game(const HamiltonianEval& h);

ConstrainedHamiltonianEval constrained_eval(double P, const Vec& Lambda, const ConeSpec& cone1,
                                            const ConeSpec& cone2, const NodeCoefficients& c,
                                            const ConstrainedOptions& opt = {});

/// Saddle value of the constrained problem with sign s = +1 (Htilde1) or -1 (Htilde2).
double htilde(int sign, double P, const Vec& Lambda, const ConeSpec& cone1,
              const ConeSpec& cone2, const NodeCoefficients& c, double margin = 0.0);

}  // namespace sregame
