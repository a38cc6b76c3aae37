use susyfin::finance::OptionContract;
use susyfin::montecarlo::{barrier_estimate, feynman_kac_estimate, GbmConfig};

// Same bits with and without the `parallel` feature; run the suite under
// `--no-default-features` too.
#[test]
fn estimates_do_not_depend_on_threading() {
    let cfg = GbmConfig::new(0.05, 0.2, 100.0, 0.0, 1.0, 50_000, 3).unwrap();
    let call = OptionContract::european_call(100.0, 1.0).unwrap();
    let a = feynman_kac_estimate(&cfg, &|s| call.payoff(s), 100.0, 0.0).unwrap();
    assert_eq!(a.mean.to_bits(), 0x4025c5a9d8f4e814);
    assert_eq!(a.std_error.to_bits(), 0x3fb19e39a3be9a2b);

    let knock = OptionContract::down_and_out_call(100.0, 1.0, 90.0).unwrap();
    let c = barrier_estimate(&GbmConfig { paths: 5_000, ..cfg }, &knock, 250.0).unwrap();
    assert_eq!(c.mean.to_bits(), 0x40221dfe46c6ab4d);
}
