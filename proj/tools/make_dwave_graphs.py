#!/usr/bin/env python3
"""Export the Pegasus (4,264 nodes) and Zephyr (3,360 nodes) topologies as
dense 0-based edge lists.

    pip install dwave-networkx
    python3 tools/make_dwave_graphs.py data/graphs
"""
import sys
from pathlib import Path

import dwave_networkx as dnx


def export(graph, path, title):
    ids = {node: k for k, node in enumerate(sorted(graph.nodes()))}
    edges = sorted(tuple(sorted((ids[u], ids[v]))) for u, v in graph.edges())
    with open(path, "w") as f:
        f.write(f"# {title}: {len(ids)} nodes, {len(edges)} edges\n")
        for u, v in edges:
            f.write(f"{u} {v}\n")


def main():
    out = Path(sys.argv[1] if len(sys.argv) > 1 else "data/graphs")
    out.mkdir(parents=True, exist_ok=True)
    export(dnx.pegasus_graph(14, fabric_only=True), out / "pegasus_4264.edges", "pegasus_graph(14, fabric_only=True)")
    export(dnx.zephyr_graph(10), out / "zephyr_3360.edges", "zephyr_graph(10)")


if __name__ == "__main__":
    main()
