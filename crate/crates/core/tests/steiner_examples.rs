use fracvort_core::steiner::configs::{nine_point_cluster, six_point_cluster};
use fracvort_core::steiner::{enumerate_partitions, lambda_mu, steiner_tree, LambdaOptions};

#[test]
fn six_point_cluster_minimizer_is_connected() {
    let eps = 0.05;
    let pts = six_point_cluster(eps);
    let res = lambda_mu(&pts, 3, LambdaOptions::default()).unwrap();
    assert_eq!(res.forest.components().len(), 1);
    assert!(res.value <= 3.0 + 6.0 * eps + 1e-9);
    for p in enumerate_partitions(6, 3).unwrap().iter().filter(|p| p.blocks.len() == 2) {
        let split: f64 = p
            .blocks
            .iter()
            .map(|b| steiner_tree(&b.iter().map(|&k| pts[k]).collect::<Vec<_>>()).unwrap().total_length())
            .sum();
        assert!(split > res.value + 1e-9, "{p:?}: {split} vs {}", res.value);
    }
}

#[test]
fn nine_point_cluster_minimizer_is_connected_for_small_delta() {
    let (eps, delta) = (0.05, 0.002);
    let pts = nine_point_cluster(eps, delta);
    let res = lambda_mu(&pts, 3, LambdaOptions { large: true }).unwrap();
    assert_eq!(res.forest.components().len(), 1);
    assert!(res.value <= 3.0 + 4.0 * eps + 8.0 * delta + 1e-9);
}

#[test]
fn nine_point_cluster_splits_when_delta_is_not_small() {
    let (eps, delta) = (0.05, 0.005);
    let pts = nine_point_cluster(eps, delta);
    let res = lambda_mu(&pts, 3, LambdaOptions { large: true }).unwrap();
    let connected = fracvort_core::steiner::steiner_tree_limited(&pts, 9).unwrap().total_length();
    assert!((connected - (3.0 + 4.0 * eps + 8.0 * delta)).abs() < 1e-9);
    assert!(res.value < connected - 1e-3);
    assert_eq!(res.forest.components().len(), 3);
}
