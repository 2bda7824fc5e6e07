"""Effective Hamiltonian of a one-dimensional eikonal cell problem.

For F(x, p) = |p| - sin(2 pi x) the effective Hamiltonian has the closed form
max(1, |p|): the flat part comes from the maximum of the source, the linear
part from the slope itself.  This script tabulates it with the discounted
solver, checks each point against the long-time slope, and prints the table
next to the closed form.

    python demos/eikonal_table.py
"""

import numpy as np

from hjhomog import PGrid, TorusGrid, tabulate
from hjhomog.corpus import eikonal_sin


def main():
    grid = TorusGrid((256,))
    p_grid = PGrid.from_values(np.arange(-2.0, 2.01, 0.5))
    table = tabulate(eikonal_sin(), grid, p_grid)

    print(f"{'p':>6} {'discount':>10} {'longtime':>10} {'max(1,|p|)':>11}")
    for P, pt in zip(p_grid.coords(0), table.points):
        print(f"{P:6.2f} {pt.value:10.4f} {pt.longtime:10.4f} {max(1.0, abs(P)):11.4f}")
    if table.warnings:
        print("warnings:", *table.warnings, sep="\n  ")

    # between lattice points the table interpolates linearly
    print(f"\ninterpolated at p = 1.25: {table(1.25):.4f} (closed form 1.25)")


if __name__ == "__main__":
    main()
