//! Fit a small ReLU network to `sin(x)` with hand-written backprop and Adam.
//!
//!     cargo run --release --example mlp_regression

use sbridge::{AdamConfig, AdamState, Matrix, MlpNetwork, Rng};

fn main() -> sbridge::Result<()> {
    let mut rng = Rng::new(7);
    let mut net = MlpNetwork::init(&[1, 32, 32, 1], 0, &mut rng)?;
    let mut adam = AdamState::new(net.num_params(), AdamConfig { lr: 3e-3, ..Default::default() });

    let n = 256;
    for step in 0..=3000 {
        let x = Matrix::from_fn(n, 1, |_, _| rng.uniform_range(-3.0, 3.0));
        let trace = net.forward_trace(&x, None)?;
        // d/dy of mean squared error
        let up = Matrix::from_fn(n, 1, |i, _| 2.0 * (trace.output.get(i, 0) - x.get(i, 0).sin()) / n as f64);
        let grads = net.backward_batch(&trace, None, &up)?;
        adam.update(net.params_mut(), &grads.params)?;
        if step % 500 == 0 {
            let mse: f64 = (0..n).map(|i| (trace.output.get(i, 0) - x.get(i, 0).sin()).powi(2)).sum::<f64>() / n as f64;
            println!("step {step:5}  mse {mse:.2e}");
        }
    }
    for x in [-2.0, -1.0, 0.0, 1.0, 2.0] {
        println!("f({x:+.1}) = {:+.4}   sin = {:+.4}", net.forward(&[x], None)?[0], f64::sin(x));
    }
    Ok(())
}
