use blowup_demo::{bubble_solve, mesh_view, robin_table};

#[test]
fn mesh_view_is_consistent() {
    let v = mesh_view("ellipse", 2.0, 1.0, 0.2).unwrap();
    assert_eq!(v.points.len(), v.stats.vertices);
    assert_eq!(v.triangles.len(), v.stats.triangles);
    assert_eq!(v.stats.euler, 1);
    assert!(mesh_view("disk", 0.0, 0.0, 0.0).is_err());
    assert!(mesh_view("square", 0.0, 0.0, 0.2).is_err());
}

#[test]
fn disk_robin_is_flat() {
    let t = robin_table("disk", 0.0, 0.0, 0.1, 6).unwrap();
    let mean = t.robin.iter().sum::<f64>() / 6.0;
    assert!(t.robin.iter().all(|r| (r / mean - 1.0).abs() < 0.02));
    assert!(robin_table("disk", 0.0, 0.0, 0.1, 0).is_err());
}

#[test]
fn bubble_branch_grows_toward_the_limit() {
    let b = bubble_solve(30.0, 0.1).unwrap();
    assert_eq!(b.p, vec![10.0, 20.0, 30.0]);
    assert!(b.sup_norm.windows(2).all(|w| w[1] > w[0]));
    assert!(b.sup_norm.iter().all(|&s| s < blowup_core::SQRT_E));
    assert!(b.beta.iter().all(|x| x.is_some()));
    let peak = b.trace.iter().map(|t| t[1]).fold(0.0, f64::max);
    assert_eq!(peak, *b.sup_norm.last().unwrap());
    assert!(bubble_solve(5.0, 0.1).is_err());
}
