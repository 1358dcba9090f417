"""Independent checks for perturbed-route records, written without the
package's own validator."""

import networkx as nx


def hop_to_route(g: nx.Graph, gt, node) -> int:
    return min(nx.shortest_path_length(g, node, r) for r in gt)


def check_record(world, gt, rec, max_hops=4, vicinity=(2, 4)):
    g = nx.Graph([(a, b) for a, b, _ in world.edges()])
    path, labels, kind, span = rec["path"], rec["labels"], rec["detour_type"], rec["detour_span"]
    assert len(path) == len(labels)
    assert path[0] == gt[0] and path[-1] == gt[-1]
    assert all(g.has_edge(a, b) for a, b in zip(path, path[1:])), "disconnected path"
    if span is None:
        assert path == list(gt) and set(labels) == {0}
        return
    on_track = iter(n for n, lab in zip(path, labels) if lab == 0)
    assert all(n in on_track for n in gt), "route is not a subsequence of on-track nodes"
    s, e = span
    assert path[:s] == list(gt[:s]) and set(labels[:s]) == {0}
    assert labels.count(1) >= 1
    end = path[e]
    if kind == "revisit":
        assert end in gt[:s], "revisit must come back to a traversed route node"
        assert labels[s:e] == [1] * (e - s) and set(labels[e:]) == {0}
        outbound = path[s:e]
        j = list(gt).index(end)
        assert path[e:] == list(gt[j:])
    else:
        outbound = path[s:e + 1]
        hop = hop_to_route(g, gt, end)
        if kind == "frontier":
            assert hop == 1
        else:
            assert vicinity[0] <= hop <= vicinity[1]
        rejoin = next(r for r in range(e + 1, len(path)) if path[r] == gt[s])
        assert labels[s:e + 1] == [1] * (e - s + 1)
        assert labels[e + 1:rejoin] == [2] * (rejoin - e - 1)
        assert set(labels[rejoin:]) == {0} and path[rejoin:] == list(gt[s:])
    assert 1 <= len(outbound) <= max_hops
    assert not set(outbound) & set(gt)
