//! Binary agent files.
//!
//! Layout (little endian): magic `IRSHAGNT`, format version `u32`, the
//! 64-byte hex scenario fingerprint, variant bytes, a length-prefixed JSON
//! training config, `log_alpha`, then seven networks (D3QN online and
//! target, SAC policy, two critics, two target critics), each as a layer
//! count, the layer widths and the flat parameters.

use std::io::{Read, Write};
use std::path::Path;
use std::sync::Arc;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};

use super::codec::ReflectionOverride;
use super::d3qn::D3qn;
use super::mlp::Mlp;
use super::sac::{Sac, SacRates};
use super::trainer::{Agent, OptionSource, TrainConfig, Variant};
use crate::env::{AccessMode, Scenario};
use crate::error::{Error, Result};

const MAGIC: &[u8; 8] = b"IRSHAGNT";
pub const FORMAT_VERSION: u32 = 1;

fn write_net(w: &mut impl Write, net: &Mlp) -> Result<()> {
    let sizes = net.sizes();
    w.write_u32::<LittleEndian>(sizes.len() as u32)?;
    for s in sizes {
        w.write_u32::<LittleEndian>(s as u32)?;
    }
    for p in net.flat() {
        w.write_f64::<LittleEndian>(p)?;
    }
    Ok(())
}

fn read_net(r: &mut impl Read) -> Result<Mlp> {
    let n = r.read_u32::<LittleEndian>()? as usize;
    if !(2..=64).contains(&n) {
        return Err(Error::Format(format!("implausible layer count {n}")));
    }
    let sizes = (0..n)
        .map(|_| r.read_u32::<LittleEndian>().map(|v| v as usize))
        .collect::<std::io::Result<Vec<_>>>()?;
    if sizes.iter().any(|&s| s == 0 || s > 1 << 20) {
        return Err(Error::Format(format!("implausible layer widths {sizes:?}")));
    }
    let mut net = Mlp::zeros(&sizes);
    let mut params = vec![0.0; net.num_params()];
    r.read_f64_into::<LittleEndian>(&mut params)?;
    net.set_flat(&params)?;
    Ok(net)
}

pub fn write_agent(w: &mut impl Write, agent: &Agent) -> Result<()> {
    w.write_all(MAGIC)?;
    w.write_u32::<LittleEndian>(FORMAT_VERSION)?;
    let fp = agent.fingerprint.as_bytes();
    if fp.len() != 64 {
        return Err(Error::Format("scenario fingerprint must be 64 hex characters".into()));
    }
    w.write_all(fp)?;
    let v = agent.variant;
    w.write_u8(match v.options {
        OptionSource::Learned => 0,
        OptionSource::Uniform => 1,
    })?;
    w.write_u8(match v.reflection {
        ReflectionOverride::None => 0,
        ReflectionOverride::Absorbing => 1,
        ReflectionOverride::Identity => 2,
    })?;
    w.write_u8(match v.mode {
        AccessMode::SensingEnhanced => 0,
        AccessMode::Opportunistic => 1,
    })?;
    let cfg = serde_json::to_vec(&agent.config)?;
    w.write_u32::<LittleEndian>(cfg.len() as u32)?;
    w.write_all(&cfg)?;
    w.write_f64::<LittleEndian>(agent.sac.log_alpha)?;
    for net in [
        &agent.d3qn.online,
        &agent.d3qn.target,
        &agent.sac.policy,
        &agent.sac.q1,
        &agent.sac.q2,
        &agent.sac.q1_target,
        &agent.sac.q2_target,
    ] {
        write_net(w, net)?;
    }
    Ok(())
}

/// Reads an agent, refusing files trained on a different scenario.
pub fn read_agent(r: &mut impl Read, scenario: Arc<Scenario>) -> Result<Agent> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Format("not an agent file".into()));
    }
    let version = r.read_u32::<LittleEndian>()?;
    if version != FORMAT_VERSION {
        return Err(Error::Format(format!("agent format version {version}, expected {FORMAT_VERSION}")));
    }
    let mut fp = [0u8; 64];
    r.read_exact(&mut fp)?;
    let fp = String::from_utf8_lossy(&fp).into_owned();
    let current = scenario.fingerprint();
    if fp != current {
        return Err(Error::ScenarioMismatch {
            expected: fp,
            got: current,
        });
    }
    let options = match r.read_u8()? {
        0 => OptionSource::Learned,
        1 => OptionSource::Uniform,
        b => return Err(Error::Format(format!("unknown option source {b}"))),
    };
    let reflection = match r.read_u8()? {
        0 => ReflectionOverride::None,
        1 => ReflectionOverride::Absorbing,
        2 => ReflectionOverride::Identity,
        b => return Err(Error::Format(format!("unknown reflection override {b}"))),
    };
    let mode = match r.read_u8()? {
        0 => AccessMode::SensingEnhanced,
        1 => AccessMode::Opportunistic,
        b => return Err(Error::Format(format!("unknown access mode {b}"))),
    };
    let len = r.read_u32::<LittleEndian>()? as usize;
    let mut cfg = vec![0u8; len];
    r.read_exact(&mut cfg)?;
    let config: TrainConfig = serde_json::from_slice(&cfg)?;
    let log_alpha = r.read_f64::<LittleEndian>()?;
    let mut nets = (0..7).map(|_| read_net(r)).collect::<Result<Vec<_>>>()?.into_iter();
    let mut next = || nets.next().expect("seven networks read");
    let d3qn = D3qn::from_parts(next(), next(), config.lr_d3qn);
    let rates = SacRates {
        actor: config.lr_actor,
        critic: config.lr_critic,
        alpha: config.lr_alpha,
    };
    let sac = Sac::from_parts(next(), next(), next(), next(), next(), log_alpha, rates);
    let agent = Agent::from_parts(scenario, config, Variant { options, reflection, mode }, d3qn, sac)?;
    if agent.d3qn.online.input_dim() != crate::env::state_len(agent.scenario()) || agent.d3qn.num_options() != agent.catalog.len() {
        return Err(Error::Format("network shapes do not match the scenario".into()));
    }
    Ok(agent)
}

pub fn save_agent(path: impl AsRef<Path>, agent: &Agent) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    write_agent(&mut f, agent)?;
    f.flush()?;
    Ok(())
}

pub fn load_agent(path: impl AsRef<Path>, scenario: Arc<Scenario>) -> Result<Agent> {
    read_agent(&mut std::io::BufReader::new(std::fs::File::open(path)?), scenario)
}
