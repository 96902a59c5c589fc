//! Binary checkpoint of a [`LayeredNetwork`].
//!
//! All integers and floats are little-endian; floats are IEEE-754 binary64
//! written bit-for-bit, so a round trip is exact.
//!
//! ```text
//! magic            8 bytes  "OLPMNET\0"
//! version          u32      currently 1
//! representation   u8       0 = {0,1}, 1 = {−1,+1}
//! bias             u8       0 or 1
//! beta             f64
//! gamma            f64
//! init halfwidth   f64
//! seed             u64
//! layer count      u32      including the input layer
//! layer sizes      u32 × layer count
//! step counter     u64
//! awaiting reward  u8
//! buffers          f64 × size, for every layer in order
//! neurons          for each non-input layer, for each neuron:
//!                    potential f64, fired u8,
//!                    then per synapse: weight f64, trace f64, presyn f64
//! ```

use std::io::{Read, Write};

use super::{LayeredNetwork, NetworkConfig};
use crate::error::{Error, Result};
use crate::neuron::{NeuronUnit, Representation, SynapticState};

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"OLPMNET\0";
pub const CHECKPOINT_VERSION: u32 = 1;

fn io_err(e: std::io::Error) -> Error {
    Error::io("<checkpoint>", e)
}

pub fn write_checkpoint<W: Write>(net: &LayeredNetwork, mut out: W) -> Result<()> {
    let cfg = net.config();
    let mut buf = Vec::new();
    buf.extend_from_slice(CHECKPOINT_MAGIC);
    buf.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    buf.push(match cfg.representation {
        Representation::Asymmetric01 => 0,
        Representation::SymmetricPm1 => 1,
    });
    buf.push(u8::from(cfg.bias));
    for x in [cfg.beta, cfg.gamma, cfg.weight_init_halfwidth] {
        buf.extend_from_slice(&x.to_le_bytes());
    }
    buf.extend_from_slice(&cfg.seed.to_le_bytes());
    buf.extend_from_slice(&(cfg.layer_sizes.len() as u32).to_le_bytes());
    for &n in &cfg.layer_sizes {
        buf.extend_from_slice(&(n as u32).to_le_bytes());
    }
    buf.extend_from_slice(&net.step_counter().to_le_bytes());
    buf.push(u8::from(net.awaiting_reward()));
    for x in net.buffers().iter().flatten() {
        buf.extend_from_slice(&x.to_le_bytes());
    }
    for unit in net.layers().iter().flatten() {
        buf.extend_from_slice(&unit.potential().to_le_bytes());
        buf.push(u8::from(unit.fired()));
        for (s, u) in unit.synapses().iter().zip(unit.prev_presyn()) {
            buf.extend_from_slice(&s.weight.to_le_bytes());
            buf.extend_from_slice(&s.trace.to_le_bytes());
            buf.extend_from_slice(&u.to_le_bytes());
        }
    }
    out.write_all(&buf).map_err(io_err)
}

struct Cursor<R> {
    inner: R,
}

impl<R: Read> Cursor<R> {
    fn bytes<const N: usize>(&mut self) -> Result<[u8; N]> {
        let mut b = [0u8; N];
        self.inner.read_exact(&mut b).map_err(io_err)?;
        Ok(b)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.bytes::<1>()?[0])
    }

    fn flag(&mut self, what: &str) -> Result<bool> {
        match self.u8()? {
            0 => Ok(false),
            1 => Ok(true),
            b => Err(Error::contract(format!("checkpoint: bad {what} byte {b}"))),
        }
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.bytes()?))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.bytes()?))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.bytes()?))
    }
}

pub fn read_checkpoint<R: Read>(input: R) -> Result<LayeredNetwork> {
    let mut c = Cursor { inner: input };
    if &c.bytes::<8>()? != CHECKPOINT_MAGIC {
        return Err(Error::contract("checkpoint: bad magic"));
    }
    let version = c.u32()?;
    if version != CHECKPOINT_VERSION {
        return Err(Error::contract(format!(
            "checkpoint: unsupported version {version}"
        )));
    }
    let representation = match c.u8()? {
        0 => Representation::Asymmetric01,
        1 => Representation::SymmetricPm1,
        b => {
            return Err(Error::contract(format!(
                "checkpoint: bad representation byte {b}"
            )))
        }
    };
    let bias = c.flag("bias")?;
    let beta = c.f64()?;
    let gamma = c.f64()?;
    let weight_init_halfwidth = c.f64()?;
    let seed = c.u64()?;
    let n_layers = c.u32()? as usize;
    let layer_sizes = (0..n_layers)
        .map(|_| c.u32().map(|n| n as usize))
        .collect::<Result<Vec<_>>>()?;
    let config = NetworkConfig {
        layer_sizes,
        beta,
        gamma,
        weight_init_halfwidth,
        representation,
        seed,
        bias,
    };
    config.validate()?;
    let step_counter = c.u64()?;
    let awaiting = c.flag("awaiting-reward")?;
    let buffers = config
        .layer_sizes
        .iter()
        .map(|&n| (0..n).map(|_| c.f64()).collect::<Result<Vec<_>>>())
        .collect::<Result<Vec<_>>>()?;
    let extra = usize::from(bias);
    let mut layers = Vec::with_capacity(n_layers - 1);
    for pair in config.layer_sizes.windows(2) {
        let fan_in = pair[0] + extra;
        let mut layer = Vec::with_capacity(pair[1]);
        for _ in 0..pair[1] {
            let potential = c.f64()?;
            let fired = c.flag("fired")?;
            let mut synapses = Vec::with_capacity(fan_in);
            let mut presyn = Vec::with_capacity(fan_in);
            for _ in 0..fan_in {
                let weight = c.f64()?;
                let trace = c.f64()?;
                synapses.push(SynapticState { weight, trace });
                presyn.push(c.f64()?);
            }
            layer.push(NeuronUnit::from_parts(
                synapses,
                presyn,
                potential,
                fired,
                representation,
            ));
        }
        layers.push(layer);
    }
    let mut rest = [0u8; 1];
    if c.inner.read(&mut rest).map_err(io_err)? != 0 {
        return Err(Error::contract("checkpoint: trailing bytes"));
    }
    Ok(LayeredNetwork::from_parts(
        config,
        layers,
        buffers,
        step_counter,
        awaiting,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn trained(seed: u64, bias: bool, steps: usize, repr: Representation) -> LayeredNetwork {
        let cfg = NetworkConfig {
            layer_sizes: vec![3, 4, 2],
            beta: 0.8,
            gamma: 0.05,
            weight_init_halfwidth: 0.5,
            representation: repr,
            seed,
            bias,
        };
        let mut net = LayeredNetwork::new(cfg).unwrap();
        let mut rng = net.spike_rng();
        for t in 0..steps {
            let x = (t as f64 * 0.37).sin();
            net.step(&[x, -x, 0.5], &mut rng).unwrap();
            if t + 1 < steps {
                net.learn(x).unwrap();
            }
        }
        net
    }

    proptest! {
        #[test]
        fn round_trip_is_bit_exact(seed: u64, bias: bool, steps in 1usize..40, sym: bool) {
            let repr = if sym { Representation::SymmetricPm1 } else { Representation::Asymmetric01 };
            let net = trained(seed, bias, steps, repr);
            let mut bytes = Vec::new();
            write_checkpoint(&net, &mut bytes).unwrap();
            let back = read_checkpoint(bytes.as_slice()).unwrap();
            let mut again = Vec::new();
            write_checkpoint(&back, &mut again).unwrap();
            prop_assert_eq!(&bytes, &again);
            prop_assert_eq!(back, net);
        }
    }

    #[test]
    fn resumed_network_continues_identically() {
        let mut a = trained(5, true, 10, Representation::SymmetricPm1);
        let mut bytes = Vec::new();
        write_checkpoint(&a, &mut bytes).unwrap();
        let mut b = read_checkpoint(bytes.as_slice()).unwrap();
        a.learn(1.0).unwrap();
        b.learn(1.0).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn corrupt_input_is_rejected() {
        let net = trained(1, false, 3, Representation::SymmetricPm1);
        let mut bytes = Vec::new();
        write_checkpoint(&net, &mut bytes).unwrap();
        assert!(read_checkpoint(&bytes[..bytes.len() - 1]).is_err());
        let mut extra = bytes.clone();
        extra.push(0);
        assert!(read_checkpoint(extra.as_slice()).is_err());
        let mut bad_magic = bytes.clone();
        bad_magic[0] = b'X';
        assert!(read_checkpoint(bad_magic.as_slice()).is_err());
    }
}
