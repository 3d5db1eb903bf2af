"""Brute-force quintic resonances at k=0 against the four-parameter family."""
import argparse

from nlsinflate.resonance import QuinticParam, enumerate_resonant_array, parametrize_quintic, verify_characterization


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--K", type=int, default=6)
    args = ap.parse_args()

    rep = verify_characterization(args.K)
    print(rep.summary())

    arr = enumerate_resonant_array(1, 2, (0,), args.K)[:, :, 0]
    nontrivial = [tuple(int(v) for v in row) for row in arr if len(set(row.tolist())) > 2]
    print(f"{len(nontrivial)} tuples with more than two distinct entries, e.g.")
    for t in nontrivial[:5]:
        print("  ", t)

    print("\nfamily member a=b=p=q=1:")
    for t in sorted(parametrize_quintic(QuinticParam(1, 1, 1, 1))):
        print("  ", t.ints)


if __name__ == "__main__":
    main()
