//! Step response of the discrete Bessel prefilter at a few orders.

use t3_failsafe::control::bessel::BesselFilter;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dt = 1e-3;
    let mut filters: Vec<BesselFilter> = [1, 2, 4]
        .into_iter()
        .map(|n| BesselFilter::new(40.0, n, dt))
        .collect::<Result<_, _>>()?;

    for f in &filters {
        let (b, a) = f.coefficients();
        println!("order {}: b = {b:.6?}\n         a = {a:.6?}", f.order());
    }

    println!("\n{:>6} {:>9} {:>9} {:>9}", "ms", "n=1", "n=2", "n=4");
    for k in 0..30 {
        let y: Vec<f64> = filters.iter_mut().map(|f| f.filter(1.0)).collect();
        if k % 2 == 0 {
            println!("{:6} {:9.5} {:9.5} {:9.5}", k, y[0], y[1], y[2]);
        }
    }
    Ok(())
}
