use dimerloop_web::Lab;

#[test]
fn lab_sweeps_and_draws() {
    let mut lab = Lab::new("primal-rect", 3, 4.0, 0.5, 4.0, 0.2, 1).unwrap();
    lab.sweep(20).unwrap();
    let stats: serde_json::Value = serde_json::from_str(&lab.stats().unwrap()).unwrap();
    assert_eq!(stats["sweeps"], 20);
    assert!(lab.svg(true).unwrap().starts_with("<svg"));
}
