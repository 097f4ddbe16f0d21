//! Reverse-mode differentiation of a small two-layer network, checked
//! against central finite differences.

use futurex::tensor::{grad_check, Graph, Tensor};

fn main() -> futurex::Result<()> {
    let x = Tensor::from_rows(&[&[0.5, -1.0, 2.0], &[1.5, 0.25, -0.75]])?;
    let w1 = Tensor::from_rows(&[&[0.1, -0.2], &[0.3, 0.4], &[-0.5, 0.6]])?;
    let w2 = Tensor::from_rows(&[&[0.7], &[-0.8]])?;
    let net = |g: &mut Graph, p: &[futurex::tensor::Var], x: &Tensor| -> futurex::Result<futurex::tensor::Var> {
        let x = g.constant(x.clone());
        let h = g.matmul(x, p[0])?;
        let h = g.gelu(h)?;
        let y = g.matmul(h, p[1])?;
        let y = g.abs(y)?;
        g.sum_all(y)
    };

    let mut g = Graph::new();
    let p = [g.param(w1.clone()), g.param(w2.clone())];
    let loss = net(&mut g, &p, &x)?;
    g.backward(loss)?;
    println!("loss {:.6}", g.item(loss));
    println!("dL/dw1 {:?}", g.grad(p[0]).data());
    println!("dL/dw2 {:?}", g.grad(p[1]).data());

    let mut params = vec![w1, w2];
    let report = grad_check(&mut params, &["w1".to_string(), "w2".to_string()], 1e-6, 1e-6, |g, v| net(g, v, &x))?;
    for e in &report.entries {
        println!("{:<4} max relative error {:.2e}", e.label, e.max_rel_err);
    }
    println!("gradient check {}", if report.passed() { "passed" } else { "failed" });
    Ok(())
}
