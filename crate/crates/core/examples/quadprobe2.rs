// scratch probe: composite log-space GL designs
use blindeconv::dct::make_dictionary;
use blindeconv::moments::{theoretical_moments, MomentSet};
use blindeconv::priors::{KernelPrior, NoiseModel, SignalPrior};
use blindeconv::quad::gamma_quadrature_panels;

fn main() {
    let dict = make_dictionary(8, 16, 42).unwrap();
    let signal = SignalPrior::new(dict, 0.5).unwrap();
    let kernel = KernelPrior::new(5, 2.0, 1.0).unwrap();
    let noise = NoiseModel::new(0.0009).unwrap();
    for panels in [2usize, 4, 8] {
        let mut prev: Option<MomentSet> = None;
        for nodes in [32usize, 64, 128] {
            let rule = gamma_quadrature_panels(kernel.a, kernel.beta, nodes, panels).unwrap();
            let mo = theoretical_moments(&signal, &kernel, &noise, &rule).unwrap();
            if let Some(p) = prev {
                let rel = |a: &nalgebra::DMatrix<f64>, b: &nalgebra::DMatrix<f64>| {
                    (a - b).amax() / b.amax()
                };
                println!(
                    "P={panels} M={nodes:4}  dCyy={:.3e}  dCxy={:.3e}  dChy={:.3e}",
                    rel(&p.c_yy, &mo.c_yy),
                    rel(&p.c_xy, &mo.c_xy),
                    rel(&p.c_hy, &mo.c_hy),
                );
            }
            prev = Some(mo);
        }
    }
}
