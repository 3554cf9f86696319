"""Slide a small unseen cluster across the field and tabulate what the search reports.

Each cell shows F (found inside the window), N (found only in the near margin)
or . (nothing found) for a 3-point cluster centred at that position.
"""
import argparse

from oculo.perimetry import Cartogram, Eye, Sex, StimulusPoint, blind_spot_search


def cartogram(eye, centre):
    m0, e0 = centre
    points = [StimulusPoint(m, e, True, 28.0) for m in range(-165, 181, 15) for e in (3, 9, 21, 27)]
    points += [StimulusPoint(m0 + dm, e0 + de, False, 0.0) for dm, de in ((-0.5, 0.0), (0.5, 0.0), (0.0, 0.5))]
    return Cartogram("sweep", eye, 50, Sex.UNSPECIFIED, None, tuple(points))


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--eye", default="right", choices=["right", "left"])
    args = ap.parse_args()
    eye = Eye.parse(args.eye)
    meridians = list(range(-30, 1, 2))
    print("ecc\\mer " + " ".join(f"{m:>3d}" for m in meridians))
    for ecc in range(4, 25):
        cells = []
        for m in meridians:
            r = blind_spot_search(cartogram(eye, (float(m), float(ecc))))
            cells.append("F" if r.within_anatomical_window else "N" if r.found else ".")
        print(f"{ecc:>7d} " + " ".join(f"{c:>3s}" for c in cells))


if __name__ == "__main__":
    main()
