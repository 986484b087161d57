use growthbound::geometry::Region;
use growthbound::perron::*;

fn square(n: usize) -> (Region, Grid) {
    let r = Region::AxisBox {
        lo: vec![0.0, 0.0],
        hi: vec![1.0, 1.0],
    };
    let g = Grid::new(&r, n).unwrap();
    (r, g)
}

// Dense Jacobi iteration on a plain 2-D array, run to a fixed point.
fn dense_oracle(f: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = f.len();
    let mut u = f.to_vec();
    loop {
        let mut next = u.clone();
        let mut change = 0.0f64;
        for i in 1..n - 1 {
            for j in 1..n - 1 {
                let avg = 0.25 * (u[i - 1][j] + u[i + 1][j] + u[i][j - 1] + u[i][j + 1]);
                next[i][j] = avg.min(f[i][j]);
                change = change.max((next[i][j] - u[i][j]).abs());
            }
        }
        u = next;
        if change == 0.0 {
            return u;
        }
    }
}

#[test]
fn toy_grid_matches_dense_oracle() {
    for (n, bump) in [(5usize, 1.0), (9, 5.0)] {
        let (_, g) = square(n);
        let c = 0.5;
        let obs = Obstacle::from_fn(
            &g,
            |p| {
                let r2 = (p[0] - c).powi(2) + (p[1] - c).powi(2);
                if r2 < 1e-12 {
                    bump
                } else {
                    p[0] * 0.3 + (1.0 - p[1]) * 0.1 + r2
                }
            },
            f64::INFINITY,
        );
        let opts = PerronOptions {
            tol: 1e-15,
            max_iters: 100_000,
            schedule: Schedule::RedBlack,
        };
        let r = largest_subharmonic_minorant(&obs, &g, &opts).unwrap();
        let dense: Vec<Vec<f64>> = (0..n)
            .map(|i| (0..n).map(|j| obs.values[g.index(&[i, j])]).collect())
            .collect();
        let want = dense_oracle(&dense);
        for i in 0..n {
            for j in 0..n {
                let got = r.field[g.index(&[i, j])];
                assert!((got - want[i][j]).abs() < 1e-12, "({i},{j}): {got} vs {}", want[i][j]);
            }
        }
    }
}

#[test]
fn center_spike_is_flattened() {
    let (_, g) = square(5);
    let obs = Obstacle::from_fn(
        &g,
        |p| if (p[0] - 0.5).abs() < 1e-9 && (p[1] - 0.5).abs() < 1e-9 { 1.0 } else { 0.0 },
        1.0,
    );
    let r = largest_subharmonic_minorant(&obs, &g, &PerronOptions::for_cap(1.0)).unwrap();
    assert!(r.field.iter().all(|&v| v.abs() < 1e-12));
}

#[test]
fn log_kernel_obeys_maximum_principle() {
    let disk = Region::unit_disk();
    let g = Grid::new(&disk, 65).unwrap();
    let cap = -(g.h).ln();
    let obs = Obstacle::from_fn(&g, |p| -(p[0].hypot(p[1])).ln(), cap);
    let opts = PerronOptions::for_cap(cap);
    let r = largest_subharmonic_minorant(&obs, &g, &opts).unwrap();
    // Ghost values are -log|x| <= 0 outside the disk, so no discrete
    // subharmonic minorant can rise above 0 inside.
    let ghost_max = (0..g.len())
        .filter(|&i| g.class(i) == NodeClass::Ghost)
        .map(|i| obs.values[i])
        .fold(f64::NEG_INFINITY, f64::max);
    assert!(ghost_max <= 1e-12);
    for i in g.free_nodes() {
        assert!(r.field[i] <= obs.values[i]);
        assert!(r.field[i] <= ghost_max + 1e4 * opts.tol, "{} at {:?}", r.field[i], g.point(i));
    }
}

#[test]
fn sweeps_decrease_and_schedules_agree() {
    let disk = Region::unit_disk();
    let mut g = Grid::new(&disk, 33).unwrap();
    g.pin(|p| (p[0] - 0.3).hypot(p[1]) < 0.5 * 1.5 * 2.0 / 32.0);
    let cap = 32.0;
    let obs = Obstacle::from_fn(
        &g,
        |p| 1.0 / (p[0] - 0.3).hypot(p[1]).min(p[0] + 0.4).max(1e-300),
        cap,
    );
    let mut opts = PerronOptions::for_cap(cap);
    let rb = largest_subharmonic_minorant(&obs, &g, &opts).unwrap();
    for w in rb.residual_trace.windows(2) {
        assert!(w[1] <= w[0] * (1.0 + 1e-9));
    }
    assert!(rb.converged);
    assert!(rb.field.iter().zip(&obs.values).all(|(u, f)| u <= f));
    opts.schedule = Schedule::Jacobi;
    let jc = largest_subharmonic_minorant(&obs, &g, &opts).unwrap();
    let diff = rb
        .field
        .iter()
        .zip(&jc.field)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    assert!(diff <= 10.0 * opts.tol, "{diff} vs tol {}", opts.tol);
    let inactive = |i: usize| (rb.field[i] - obs.values[i]).abs() < 1e-12 * cap;
    let sub = discrete_subharmonic_check(&rb.field, &g, 1e3 * opts.tol, |i| {
        g.class(i) == NodeClass::Pinned || inactive(i)
    });
    assert!(sub.passed(), "{:?}", sub.violations.first());
}

#[test]
fn pinned_cells_hold_the_obstacle() {
    let disk = Region::unit_disk();
    let mut g = Grid::new(&disk, 17).unwrap();
    g.pin(|p| p[0].hypot(p[1]) < 1e-9);
    let obs = Obstacle::from_fn(&g, |p| if p[0].hypot(p[1]) < 1e-9 { 10.0 } else { 0.0 }, 10.0);
    let r = largest_subharmonic_minorant(&obs, &g, &PerronOptions::for_cap(10.0)).unwrap();
    let c = g.index(&[8, 8]);
    assert_eq!(r.field[c], 10.0);
}

#[test]
fn infinite_bound_never_violates_and_small_bound_does() {
    let (_, g) = square(9);
    let field = vec![1.0; g.len()];
    let r = perron_vs_bound(&field, &g, |_| f64::INFINITY, 0.0);
    assert_eq!(r.checked, 0);
    assert!(r.passed());
    let r = perron_vs_bound(&field, &g, |_| 0.1, 0.01);
    assert_eq!(r.violations, g.free_count());
    assert!(r.witness.is_some());
}

#[test]
fn field_csv_round_trip() {
    let (_, g) = square(7);
    let obs = Obstacle::from_fn(&g, |p| p[0] + 2.0 * p[1], 10.0);
    let r = largest_subharmonic_minorant(&obs, &g, &PerronOptions::for_cap(10.0)).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("field.csv");
    write_field_csv(&path, &g, &r.field, &obs, "# generated_unix=0").unwrap();
    let back = Obstacle::read_csv(&path, &g).unwrap();
    for (a, b) in back.values.iter().zip(&obs.values) {
        assert!((a - b).abs() <= 1e-12 * b.abs().max(1.0));
    }
}

#[test]
fn constant_obstacle_is_fixed_after_one_sweep() {
    let (_, g) = square(17);
    let obs = Obstacle::from_fn(&g, |_| 2.5, 10.0);
    let r = largest_subharmonic_minorant(&obs, &g, &PerronOptions::for_cap(10.0)).unwrap();
    assert_eq!(r.iterations, 1);
    assert!(r.field.iter().all(|&v| v == 2.5));
}
