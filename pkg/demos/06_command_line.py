"""Reading Matrix Market files and the ``kemeny`` command.

The script writes a small graph to a temporary folder, then calls the same
entry point the console script uses. Malformed input yields exit code 2
with the offending line number; a disconnected graph yields exit code 3.
"""

from pathlib import Path
import tempfile

import scipy.sparse as sp

from kemeny import grid_graph, write_matrix_market
from kemeny.cli import main
from kemeny.generators import path_graph

with tempfile.TemporaryDirectory() as tmp:
    tmp = Path(tmp)
    grid = tmp / "grid.mtx"
    write_matrix_market(str(grid), grid_graph(12), field="pattern", symmetry="symmetric")

    print("$ kemeny grid.mtx")
    main([str(grid)])
    print("\n$ kemeny grid.mtx --method dnc --n0 32 --json")
    main([str(grid), "--method", "dnc", "--n0", "32", "--json"])
    print("\n$ kemeny grid.mtx --normalize sym --method hutchpp --seed 1 --csv")
    main([str(grid), "--normalize", "sym", "--method", "hutchpp", "--seed", "1", "--csv"])

    bad = tmp / "bad.mtx"
    bad.write_text("%%MatrixMarket matrix coordinate real general\n3 3 2\n1 2 1.0\n2 x 1.0\n")
    print(f"\n$ kemeny bad.mtx   -> exit {main([str(bad)])}")

    split = tmp / "split.mtx"
    write_matrix_market(str(split), sp.block_diag([path_graph(4), path_graph(5)]), field="pattern")
    print(f"$ kemeny split.mtx -> exit {main([str(split)])}")
    print(f"$ kemeny split.mtx --largest-scc -> exit {main([str(split), '--largest-scc'])}")
