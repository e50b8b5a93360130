//! Compression rate and roundtrip fidelity of the group quantizers on a Gaussian tensor.

use num_complex::Complex32;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rqcsim::quantizer::{compression_rate, decode, dequantize, encode, quantize, roundtrip_fidelity, QuantScheme};
use rqcsim::{DenseTensor, Mode, Precision};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let t = DenseTensor::from_fn(vec![Mode::new("x", 1 << 15)], Precision::C64, |_| {
        Complex32::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
    })?;

    println!("{:<10} {:>10} {:>10}", "scheme", "CR %", "fidelity");
    for s in [QuantScheme::half(), QuantScheme::int8(), QuantScheme::int4(64), QuantScheme::int4(128), QuantScheme::int4(256)] {
        let q = quantize(&t, &s)?;
        println!("{:<10} {:>10.4} {:>10.6}", s.to_string(), compression_rate(&q), roundtrip_fidelity(&t, &s)?);
    }

    let q = quantize(&t, &QuantScheme::int4(128))?;
    let wire = encode(&q);
    let back = dequantize(&decode(&wire)?)?;
    println!("int4:128 wire message: {} bytes for {} elements, {} restored", wire.len(), t.len(), back.len());
    Ok(())
}
