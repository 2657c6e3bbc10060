#![allow(dead_code)]

//! Shared generators and independent oracles for the integration tests.
//!
//! The d-separation oracle enumerates undirected simple paths and applies
//! the blocking rules node by node, so it shares no code with the moral
//! graph construction in the library. Network and data generators are
//! seeded and deterministic.

use bnet::search::legal_moves;
use bnet::{
    ArcConstraints, Cpt, Dag, Dataset, Factor, Move, Network, NodeId, ScoreSpec, Scorer,
    VariableSchema,
};
use rand::Rng;
use rand::seq::SliceRandom;
use rand_chacha::ChaCha20Rng;
use std::collections::BTreeSet;

/// Path-enumeration d-separation. Walks every undirected simple path
/// between the sets and checks the collider rule at each interior node.
/// Exponential in path count, fine for the small graphs used in tests.
pub fn dsep_oracle(dag: &Dag, x: &[&str], y: &[&str], z: &[&str]) -> bool {
    let zset: BTreeSet<&str> = z.iter().copied().collect();
    let yset: BTreeSet<&str> = y.iter().copied().collect();

    // Undirected adjacency over the arc set.
    let nodes: Vec<NodeId> = dag.nodes().cloned().collect();
    let mut adj: std::collections::BTreeMap<&str, BTreeSet<&str>> =
        nodes.iter().map(|v| (v.as_str(), BTreeSet::new())).collect();
    let arcs = dag.arcs();
    for (from, to) in &arcs {
        adj.get_mut(from.as_str()).unwrap().insert(to);
        adj.get_mut(to.as_str()).unwrap().insert(from);
    }

    fn path_active(dag: &Dag, path: &[&str], zset: &BTreeSet<&str>) -> bool {
        for i in 1..path.len() - 1 {
            let (prev, v, next) = (path[i - 1], path[i], path[i + 1]);
            let collider = dag.has_arc(prev, v) && dag.has_arc(next, v);
            if collider {
                // Open only if v or one of its descendants is observed.
                let opened = zset.iter().any(|w| dag.has_path(v, w));
                if !opened {
                    return false;
                }
            } else if zset.contains(v) {
                return false;
            }
        }
        true
    }

    fn dfs<'a>(
        dag: &Dag,
        adj: &std::collections::BTreeMap<&'a str, BTreeSet<&'a str>>,
        path: &mut Vec<&'a str>,
        on_path: &mut BTreeSet<&'a str>,
        yset: &BTreeSet<&'a str>,
        zset: &BTreeSet<&'a str>,
    ) -> bool {
        let v = *path.last().unwrap();
        if yset.contains(v) {
            return path_active(dag, path, zset);
        }
        for &w in &adj[v] {
            if on_path.contains(w) {
                continue;
            }
            path.push(w);
            on_path.insert(w);
            if dfs(dag, adj, path, on_path, yset, zset) {
                return true;
            }
            on_path.remove(w);
            path.pop();
        }
        false
    }

    for sx in x {
        let mut path = vec![*sx];
        let mut on_path: BTreeSet<&str> = [*sx].into_iter().collect();
        if dfs(dag, &adj, &mut path, &mut on_path, &yset, &zset) {
            return false;
        }
    }
    true
}

/// Every labeled DAG on `nodes`, by brute force: each unordered pair is
/// absent, forward, or backward, and cyclic assignments are dropped.
/// Yields 25 graphs on three nodes and 543 on four.
pub fn all_dags(nodes: &[&str]) -> Vec<Dag> {
    let mut pairs = Vec::new();
    for i in 0..nodes.len() {
        for j in (i + 1)..nodes.len() {
            pairs.push((nodes[i], nodes[j]));
        }
    }
    let mut out = Vec::new();
    let total = 3usize.pow(pairs.len() as u32);
    'outer: for code in 0..total {
        let mut dag = Dag::new(nodes.iter().copied()).unwrap();
        let mut c = code;
        for &(a, b) in &pairs {
            let choice = c % 3;
            c /= 3;
            let result = match choice {
                0 => Ok(()),
                1 => dag.add_arc(a, b),
                _ => dag.add_arc(b, a),
            };
            if result.is_err() {
                continue 'outer;
            }
        }
        out.push(dag);
    }
    out
}

/// Random DAG: a shuffled total order with each forward pair kept as an
/// arc with probability `arc_prob`.
pub fn random_dag(rng: &mut ChaCha20Rng, nodes: &[&str], arc_prob: f64) -> Dag {
    let mut order: Vec<&str> = nodes.to_vec();
    order.shuffle(rng);
    let mut dag = Dag::new(nodes.iter().copied()).unwrap();
    for i in 0..order.len() {
        for j in (i + 1)..order.len() {
            if rng.gen::<f64>() < arc_prob {
                dag.add_arc(order[i], order[j]).unwrap();
            }
        }
    }
    dag
}

/// Random positive CPTs over `dag`. `cards` aligns with the node names in
/// lexicographic order. Level labels are `"0"`, `"1"`, ...
pub fn random_network(rng: &mut ChaCha20Rng, dag: &Dag, cards: &[usize]) -> Network {
    let nodes: Vec<NodeId> = dag.nodes().cloned().collect();
    assert_eq!(nodes.len(), cards.len());
    let card_of = |v: &str| -> usize {
        cards[nodes.iter().position(|n| n == v).unwrap()]
    };
    let schemas: Vec<VariableSchema> = nodes
        .iter()
        .zip(cards)
        .map(|(v, &r)| {
            let levels: Vec<String> = (0..r).map(|k| k.to_string()).collect();
            VariableSchema::new(v.clone(), v.clone(), levels).unwrap()
        })
        .collect();
    let mut cpts = Vec::new();
    for v in &nodes {
        let parents: Vec<NodeId> = dag.parents(v).unwrap().iter().cloned().collect();
        let r = card_of(v);
        let q: usize = parents.iter().map(|p| card_of(p)).product();
        let mut table = Vec::with_capacity(q * r);
        for _ in 0..q {
            let mut row: Vec<f64> = (0..r).map(|_| rng.gen::<f64>() + 0.05).collect();
            let sum: f64 = row.iter().sum();
            for p in &mut row {
                *p /= sum;
            }
            table.extend(row);
        }
        cpts.push(Cpt::new(v.clone(), parents, r, q, table).unwrap());
    }
    Network::new(dag.clone(), schemas, cpts).unwrap()
}

/// Ancestral sampling. Rows come back in schema (lexicographic) column
/// order, complete.
pub fn forward_sample(rng: &mut ChaCha20Rng, net: &Network, n: usize) -> Dataset {
    let schemas = net.schemas().to_vec();
    let col_of = |v: &str| -> usize {
        schemas.iter().position(|s| s.code == v).unwrap()
    };
    let topo = net.dag().topological_order();
    let mut rows = Vec::with_capacity(n);
    for _ in 0..n {
        let mut row: Vec<Option<u32>> = vec![None; schemas.len()];
        for v in &topo {
            let cpt = net.cpt(v).unwrap();
            // Parent configuration index, first parent most significant.
            let mut j = 0usize;
            for p in &cpt.parents {
                let level = row[col_of(p)].expect("parents sampled first") as usize;
                j = j * schemas[col_of(p)].cardinality() + level;
            }
            let u: f64 = rng.gen();
            let mut cum = 0.0;
            let mut k = cpt.r - 1;
            for (idx, p) in cpt.row(j).iter().enumerate() {
                cum += p;
                if u < cum {
                    k = idx;
                    break;
                }
            }
            row[col_of(v)] = Some(k as u32);
        }
        rows.push(row);
    }
    Dataset::new(schemas, rows).unwrap()
}

/// Uniform random complete dataset over the given schemas.
pub fn random_dataset(rng: &mut ChaCha20Rng, schemas: Vec<VariableSchema>, n: usize) -> Dataset {
    let cards: Vec<usize> = schemas.iter().map(|s| s.cardinality()).collect();
    let rows: Vec<Vec<Option<u32>>> = (0..n)
        .map(|_| cards.iter().map(|&r| Some(rng.gen_range(0..r) as u32)).collect())
        .collect();
    Dataset::new(schemas, rows).unwrap()
}

/// Binary schemas named by the given codes, levels "0"/"1".
pub fn binary_schemas(codes: &[&str]) -> Vec<VariableSchema> {
    codes
        .iter()
        .map(|c| VariableSchema::new(*c, *c, ["0", "1"]).unwrap())
        .collect()
}

/// A fixed five node, five arc network (the chain A -> B -> C -> D -> E
/// closed by A -> E) with strong conditional dependences, used for
/// structure recovery.
pub fn recovery_network() -> Network {
    let mut dag = Dag::new(["A", "B", "C", "D", "E"]).unwrap();
    for (f, t) in [("A", "B"), ("B", "C"), ("C", "D"), ("D", "E"), ("A", "E")] {
        dag.add_arc(f, t).unwrap();
    }
    let schemas = binary_schemas(&["A", "B", "C", "D", "E"]);
    let cpts = vec![
        Cpt::new("A", vec![], 2, 1, vec![0.55, 0.45]).unwrap(),
        Cpt::new("B", vec!["A".into()], 2, 2, vec![0.9, 0.1, 0.1, 0.9]).unwrap(),
        Cpt::new("C", vec!["B".into()], 2, 2, vec![0.85, 0.15, 0.15, 0.85]).unwrap(),
        Cpt::new("D", vec!["C".into()], 2, 2, vec![0.85, 0.15, 0.2, 0.8]).unwrap(),
        Cpt::new(
            "E",
            vec!["A".into(), "D".into()],
            2,
            4,
            vec![0.85, 0.15, 0.25, 0.75, 0.45, 0.55, 0.05, 0.95],
        )
        .unwrap(),
    ];
    Network::new(dag, schemas, cpts).unwrap()
}

/// Marginalizes a factor onto `keep` by summing out everything else.
pub fn marginalize(factor: &Factor, keep: &[&str]) -> Factor {
    let keep: BTreeSet<&str> = keep.iter().copied().collect();
    let mut out = factor.clone();
    let drop: Vec<NodeId> = out
        .scope()
        .iter()
        .filter(|v| !keep.contains(v.as_str()))
        .cloned()
        .collect();
    for v in drop {
        out = out.sum_out(&v).unwrap();
    }
    out
}

/// Checks X independent of Y given Z in the distribution `joint` (which
/// must be normalized) by cross multiplication:
/// P(x,y,z) * P(z) = P(x,z) * P(y,z) for every cell.
pub fn conditionally_independent(
    joint: &Factor,
    x: &[&str],
    y: &[&str],
    z: &[&str],
    tol: f64,
) -> bool {
    let mut xyz: Vec<&str> = x.iter().chain(y).chain(z).copied().collect();
    xyz.sort();
    let mut xz: Vec<&str> = x.iter().chain(z).copied().collect();
    xz.sort();
    let mut yz: Vec<&str> = y.iter().chain(z).copied().collect();
    yz.sort();

    let f_xyz = marginalize(joint, &xyz);
    let f_xz = marginalize(joint, &xz);
    let f_yz = marginalize(joint, &yz);
    let f_z = marginalize(joint, z);

    let scope = f_xyz.scope().to_vec();
    let cards = f_xyz.cards().to_vec();
    let project = |levels: &[usize], sub: &Factor| -> f64 {
        let sub_levels: Vec<usize> = sub
            .scope()
            .iter()
            .map(|v| levels[scope.iter().position(|s| s == v).unwrap()])
            .collect();
        sub.value(&sub_levels)
    };

    let mut levels = vec![0usize; scope.len()];
    let cells: usize = cards.iter().product();
    for _ in 0..cells {
        let p_xyz = f_xyz.value(&levels);
        let p_z = if z.is_empty() { 1.0 } else { project(&levels, &f_z) };
        let p_xz = project(&levels, &f_xz);
        let p_yz = project(&levels, &f_yz);
        if (p_xyz * p_z - p_xz * p_yz).abs() > tol {
            return false;
        }
        // Mixed-radix increment, last position fastest.
        for pos in (0..levels.len()).rev() {
            levels[pos] += 1;
            if levels[pos] < cards[pos] {
                break;
            }
            levels[pos] = 0;
        }
    }
    true
}

/// Score change a single move would produce, computed from family
/// scores through the public API.
pub fn move_delta(scorer: &mut Scorer, dag: &Dag, mv: &Move) -> f64 {
    let family = |scorer: &mut Scorer, d: &Dag, v: &str| {
        scorer.family(v, d.parents(v).unwrap()).unwrap()
    };
    let mut after = dag.clone();
    match mv {
        Move::Add { from, to } => {
            let old = family(scorer, dag, to);
            after.add_arc(from, to).unwrap();
            family(scorer, &after, to) - old
        }
        Move::Delete { from, to } => {
            let old = family(scorer, dag, to);
            after.remove_arc(from, to).unwrap();
            family(scorer, &after, to) - old
        }
        Move::Reverse { from, to } => {
            let old = family(scorer, dag, to) + family(scorer, dag, from);
            after.reverse_arc(from, to).unwrap();
            family(scorer, &after, to) + family(scorer, &after, from) - old
        }
    }
}

/// True when no legal move improves the score by more than `eps`.
pub fn is_local_optimum(
    data: &Dataset,
    spec: ScoreSpec,
    constraints: &ArcConstraints,
    dag: &Dag,
    eps: f64,
) -> bool {
    let mut scorer = Scorer::new(data, spec).unwrap();
    legal_moves(dag, constraints)
        .iter()
        .all(|mv| move_delta(&mut scorer, dag, mv) <= eps)
}

/// Splits the node set into random disjoint x, y, z with x and y
/// nonempty singletons or pairs.
pub fn random_xyz<'a>(
    rng: &mut ChaCha20Rng,
    nodes: &[&'a str],
) -> (Vec<&'a str>, Vec<&'a str>, Vec<&'a str>) {
    let mut pool: Vec<&str> = nodes.to_vec();
    pool.shuffle(rng);
    let nx = rng.gen_range(1..=2usize.min(pool.len() - 1));
    let x: Vec<&str> = pool.drain(..nx).collect();
    let ny = rng.gen_range(1..=2usize.min(pool.len()));
    let y: Vec<&str> = pool.drain(..ny).collect();
    let nz = rng.gen_range(0..=pool.len());
    let z: Vec<&str> = pool.drain(..nz).collect();
    (x, y, z)
}
