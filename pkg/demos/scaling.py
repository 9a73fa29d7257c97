"""How the solver scales on random paths.

Prints the stage timings and piece counts the bench command reports, for
uniform and random capacities.  Piece counts stay far below their worst-case
bounds on random data; the run time is dominated by the side functions.
"""
import sys

from mmrsink.cli import bench_rows

sizes = [int(a) for a in sys.argv[1:]] or [20, 40, 80, 160]
for mode in ("uniform", "random"):
    print(f"{mode} capacities")
    print("     n  total s   max F pieces  Opt pieces")
    for row in bench_rows(sizes, mode, 1, 0):
        print(f"{row['n']:6d} {row['sec_total']:8.2f} {row['max_pieces_F']:14d} {row['pieces_opt']:11d}")
