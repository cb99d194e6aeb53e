use porousflow::darcy::*;
use porousflow::linalg::loglog_slope;

fn solve(n: usize, perm: &PermeabilityField) -> (StructuredQuadMesh, FemState) {
    let mesh = StructuredQuadMesh::new(n, n, Rect::unit()).unwrap();
    let sys = assemble_darcy(&mesh, perm, &SourceField::manufactured(), LpsWeights::default()).unwrap();
    let state = solve_state(&sys, SolverOptions::default()).unwrap();
    (mesh, state)
}

#[test]
fn manufactured_convergence_orders() {
    let perm = PermeabilityField::constant(Rect::unit(), 1.0, 1.0).unwrap();
    let mut h = Vec::new();
    let mut eu = Vec::new();
    let mut ep = Vec::new();
    for n in [16, 32, 64, 128] {
        let (mesh, state) = solve(n, &perm);
        let (u, p) = l2_errors(&mesh, &state, manufactured_solution);
        println!("n={n} velocity={u:.4e} pressure={p:.4e}");
        h.push(1.0 / n as f64);
        eu.push(u);
        ep.push(p);
    }
    for w in eu.windows(2).chain(ep.windows(2)) {
        assert!(w[1] < w[0]);
    }
    assert!(ep[1] / ep[2] >= 1.8);
    let (su, sp) = (loglog_slope(&h, &eu), loglog_slope(&h, &ep));
    println!("orders: velocity {su:.3} pressure {sp:.3}");
    assert!(su >= 0.9 && sp >= 0.9);
}

#[test]
fn relabelled_partition_gives_same_state() {
    let part = PermeabilityField::grid_partition(Rect::unit(), 2, 2);
    let entries = vec![[1.0, 2.0], [3.0, 1.5], [2.5, 4.0], [1.0, 1.0]];
    let a = PermeabilityField::new(part.clone(), entries.clone()).unwrap();
    let order = [2, 0, 3, 1];
    let b =
        PermeabilityField::new(order.iter().map(|&i| part[i]).collect(), order.iter().map(|&i| entries[i]).collect())
            .unwrap();
    let (_, sa) = solve(16, &a);
    let (_, sb) = solve(16, &b);
    for (x, y) in sa.to_vector().iter().zip(sb.to_vector()) {
        assert!((x - y).abs() < 1e-12);
    }
}
