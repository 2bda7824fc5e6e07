"""Graph equation u_t + c(x)|u_x| + g(u) = 0 through its level-set lift.

The forcing g depends on the unknown u itself.  Lifting the graph of u to a
level set in (x, y) turns that dependence into an ordinary y-dependence, and
the effective Hamiltonian of the graph equation at slope p is read off the
lifted one at (p, -1).  The script compares that value with minus the
long-time growth rate of u started from linear data p x, for a few rational p.

    python demos/graph_pipeline.py
"""

from hjhomog import graph_pipeline
from hjhomog.corpus import graph_b


def main():
    graph = graph_b()
    print("c(x) = 1 + 0.25 cos(2 pi x),  g(u) = 0.1 + 0.4 sin(2 pi u)\n")
    print(f"{'p':>6} {'lifted Hbar':>12} {'-slope':>10} {'gap':>8}")
    for r in graph_pipeline(graph):
        p = f"{r.p_num}/{r.p_den}"
        print(f"{p:>6} {r.H_bar_lifted:12.4f} {-r.slope_longtime:10.4f} "
              f"{r.discrepancy:8.4f}")


if __name__ == "__main__":
    main()
