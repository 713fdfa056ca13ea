"""Search for a period-2 oscillation landscape and freeze it as the bundled fixture."""
import argparse

from ipflab.theory.oscillation import FIXTURE_PATH, detect_cycle, find_oscillation_fixture, one_shot_cost, replay


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--attempts", type=int, default=50)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out", default=str(FIXTURE_PATH))
    args = ap.parse_args()
    fx = find_oscillation_fixture(args.attempts, args.seed)
    if fx is None:
        raise SystemExit(f"no period-2 landscape found in {args.attempts} attempts")
    tr = replay(fx)
    print(f"x1={fx.x1} x2={fx.x2} period={detect_cycle(tr)} "
          f"cost ratio={tr.total_cost / one_shot_cost(fx):.3f}")
    fx.save(args.out)
    print(f"wrote {args.out}")


if __name__ == "__main__":
    main()
