"""Every norm of the package evaluated on one three-box datum."""
import math

from nlsinflate.norms import NormSpec, evaluate_norm, f_s
from nlsinflate.scenarios import build_phi, schedule_case

SPECS = [NormSpec("L2"), NormSpec.Hs(-0.5), NormSpec.Hs(-1.0), NormSpec.ModA(1), NormSpec.ModA(8),
         NormSpec.ModRhoA(1.5, 8), NormSpec.DS(-0.5, 2, 2), NormSpec.DBracket(0.0, 2, 2),
         NormSpec.DBracket(0.5, 1.5, math.inf), NormSpec.LowFreqL2(1.0)]


def main():
    sc = schedule_case("case3", 256)
    phi = build_phi(sc)
    print(f"case3 datum: N={sc.N} A={sc.A:g} r={sc.r:.4f}, {phi.n_rows} lattice points")
    for spec in SPECS:
        print(f"{spec.label():>28} {evaluate_norm(phi, spec):.6g}")
    print("\nf_s(A) for s=-1/2:")
    for A in (1, 4, 16, 64):
        print(f"  A={A:3d}  {f_s(A, -0.5):.6f}")


if __name__ == "__main__":
    main()
