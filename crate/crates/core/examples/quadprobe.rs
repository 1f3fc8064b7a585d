// scratch probe
use blindeconv::dct::make_dictionary;
use blindeconv::moments::{theoretical_moments, MomentSet};
use blindeconv::priors::{KernelPrior, NoiseModel, SignalPrior};
use blindeconv::quad::gamma_quadrature;

fn main() {
    let dict = make_dictionary(8, 16, 42).unwrap();
    let signal = SignalPrior::new(dict, 0.5).unwrap();
    let kernel = KernelPrior::new(5, 2.0, 1.0).unwrap();
    let noise = NoiseModel::new(0.0009).unwrap();
    let mut prev: Option<MomentSet> = None;
    for nodes in [32usize, 64, 128, 256, 512] {
        let rule = gamma_quadrature(kernel.a, kernel.beta, nodes).unwrap();
        let mo = theoretical_moments(&signal, &kernel, &noise, &rule).unwrap();
        if let Some(p) = prev {
            let rel = |a: &nalgebra::DMatrix<f64>, b: &nalgebra::DMatrix<f64>| {
                (a - b).amax() / b.amax()
            };
            println!(
                "M={nodes:4}  dCyy={:.3e}  dCxy={:.3e}  dChy={:.3e}  dmh={:.3e}",
                rel(&p.c_yy, &mo.c_yy),
                rel(&p.c_xy, &mo.c_xy),
                rel(&p.c_hy, &mo.c_hy),
                (&p.mean_h - &mo.mean_h).amax()
            );
        }
        prev = Some(mo);
    }
}
