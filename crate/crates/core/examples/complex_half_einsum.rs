//! Complex contraction rewritten as a real einsum, in emulated half precision.

use num_complex::Complex32;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rqcsim::tensors::{einsum_complex_as_real, einsum_pair, einsum_real, RealTensor};
use rqcsim::{fidelity, DenseTensor, EinsumSpec, Mode, Precision};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let a = RealTensor::new(vec![Mode::new("a1", 2), Mode::new("a2", 2)], vec![1., 2., 3., 4.], Precision::CHalf)?;
    let bp = RealTensor::new(
        vec![Mode::new("c0", 2), Mode::new("b1", 1), Mode::new("a2", 2)],
        vec![5., -6., 6., 5.],
        Precision::CHalf,
    )?;
    let out = einsum_real(&EinsumSpec::parse("a1a2,c0b1a2->a1b1c0")?, &a, &bp)?;
    println!("real form: dims {:?}, data {:?}", out.dims(), out.data());

    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut random = |modes| {
        DenseTensor::from_fn(modes, Precision::CHalf, |_| Complex32::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
    };
    let big = random(vec![Mode::new("i", 64), Mode::new("k", 32)])?;
    let small = random(vec![Mode::new("k", 32), Mode::new("j", 4)])?;
    let spec = EinsumSpec::parse("ik,kj->ij")?;
    let direct = einsum_pair(&spec, &big.to_precision(Precision::C64), &small.to_precision(Precision::C64))?;
    let as_real = einsum_complex_as_real(&spec, &big, &small)?;
    println!("complex-as-real vs C64 fidelity: {:.6}", fidelity(&direct, &as_real)?);
    Ok(())
}
