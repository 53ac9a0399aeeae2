//! Fixed instances shared by the benchmarks.

use elastinet::generate::{add_noise, gen_blur, gen_gaussian};
use elastinet::{Problem, RegParams};

pub struct Case {
    pub name: &'static str,
    pub problem: Problem,
    pub params: RegParams,
}

pub fn cases() -> Vec<Case> {
    let gauss = gen_gaussian(120, 120, 10, 0).expect("valid sizes");
    let blur = add_noise(&gen_blur(20, 5, 0.7).expect("valid blur"), 0.01, 0).expect("exact data");
    vec![
        Case {
            name: "gaussian120_beta2^-20",
            problem: gauss.clone(),
            params: RegParams::new(1e-5, 2f64.powi(-20)).unwrap(),
        },
        Case {
            name: "gaussian120_beta2^-12",
            problem: gauss,
            params: RegParams::new(1e-5, 2f64.powi(-12)).unwrap(),
        },
        Case {
            name: "blur400",
            problem: blur,
            params: RegParams::new(1e-3, 1e-3).unwrap(),
        },
    ]
}
