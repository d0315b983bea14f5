use std::collections::BTreeMap;

use floquet_kato::drives::{
    afti_hex, afti_rudner, registry, spin, xy_bloch, AFTIHexParams, AFTIRudnerParams, DTCChain, DriveProtocol, KickedMFI,
    ModelInfo, XYBlochParams,
};
use floquet_kato::numkernel::ComplexMatrix;

use crate::error::CliError;

/// Cylinder models take their Bloch momentum as an extra parameter.
const MOMENTUM: &str = "kx";

pub fn lookup(name: &str) -> Option<ModelInfo> {
    registry().into_iter().find(|m| m.name == name)
}

fn is_cylinder(info: &ModelInfo) -> bool {
    info.name.starts_with("afti")
}

pub fn accepts(info: &ModelInfo, key: &str) -> bool {
    info.params.iter().any(|p| p.0 == key) || (is_cylinder(info) && key == MOMENTUM)
}

pub fn is_integer(key: &str) -> bool {
    matches!(key, "L" | "Lx" | "Ly" | "seed")
}

/// Registry defaults overlaid with `seed` (if the model has one) and the explicit values.
pub fn resolve(info: &ModelInfo, overrides: &BTreeMap<String, f64>, seed: Option<u64>) -> Result<BTreeMap<String, f64>, CliError> {
    let mut out = BTreeMap::new();
    for (k, v, _) in info.params.iter() {
        let x: f64 = v.parse().map_err(|_| CliError::Validation(format!("registry default for {k} is not numeric")))?;
        out.insert(k.to_string(), x);
    }
    if is_cylinder(info) {
        out.insert(MOMENTUM.to_string(), 0.0);
    }
    if let (Some(s), true) = (seed, out.contains_key("seed")) {
        out.insert("seed".into(), s as f64);
    }
    for (k, v) in overrides {
        out.insert(k.clone(), *v);
    }
    for (k, v) in &out {
        if is_integer(k) && (v.fract() != 0.0 || *v < 0.0 || *v > u32::MAX as f64) {
            return Err(CliError::Validation(format!("parameter '{k}' must be a non-negative integer, got {v}")));
        }
    }
    Ok(out)
}

/// Parity data for pairing states of opposite symmetry sectors.
pub struct Parity {
    pub operator: ComplexMatrix,
    /// Odd under the parity; connects partners.
    pub coupling: ComplexMatrix,
}

pub struct Built {
    pub drive: DriveProtocol,
    pub parity: Option<Parity>,
    /// Open-direction cells for cylinder models, used for edge weights.
    pub ly: Option<usize>,
}

pub fn build(name: &str, p: &BTreeMap<String, f64>) -> floquet_kato::Result<Built> {
    let g = |k: &str| p.get(k).copied().unwrap_or(0.0);
    let n = |k: &str| g(k) as usize;
    let plain = |drive| Built { drive, parity: None, ly: None };
    match name {
        "xy" => Ok(plain(xy_bloch(&XYBlochParams { g: g("g"), j: g("J"), a: g("A"), omega: g("omega"), k: g("k") })?)),
        "kicked_mfi" => Ok(plain(KickedMFI::new(n("L"), g("J"), g("g"), g("h"))?.protocol(g("T"))?)),
        "dtc" => {
            let ch = DTCChain::new(n("L"), g("J"), g("disorder"), g("seed") as u64)?;
            let drive = ch.protocol(g("theta_x"), g("T"))?;
            let parity = Parity { operator: (*ch.flip).clone(), coupling: spin::sigma_z(ch.l, 0) };
            Ok(Built { drive, parity: Some(parity), ly: None })
        }
        "afti_hex" => {
            let hp = AFTIHexParams { lx: n("Lx"), ly: n("Ly"), j: g("J"), f: g("F"), omega: g("omega") };
            Ok(Built { drive: afti_hex(&hp, g(MOMENTUM))?, parity: None, ly: Some(hp.ly) })
        }
        "afti_rudner" => {
            let rp = AFTIRudnerParams {
                mu: g("mu"),
                j: g("J"),
                b: g("b"),
                a: g("a"),
                delta0: g("delta0"),
                omega: g("omega"),
                ly: n("Ly"),
            };
            Ok(Built { drive: afti_rudner(&rp, g(MOMENTUM))?, parity: None, ly: Some(rp.ly) })
        }
        other => Err(floquet_kato::Error::InvalidParameter(format!("unknown model '{other}'"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_registry_model_builds_with_defaults() {
        for info in registry() {
            let p = resolve(&info, &BTreeMap::new(), None).unwrap();
            let b = build(info.name, &p).unwrap();
            assert!(b.drive.dim() >= 2, "{}", info.name);
        }
    }

    #[test]
    fn fractional_spin_count_rejected() {
        let info = lookup("kicked_mfi").unwrap();
        let mut o = BTreeMap::new();
        o.insert("L".to_string(), 4.5);
        assert!(resolve(&info, &o, None).is_err());
    }
}
