use super::{check_constraints, ReluNetwork, ReluNetworkSpec};
use crate::error::{invalid, Error, Result};
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

pub const DEFAULT_CLASS_CAP: usize = 4096;

/// Which parameters range over the grid; the rest stay at zero.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum GridParams {
    All,
    WeightsOnly,
}

/// A finite family of networks sharing one spec.
#[derive(Debug, Clone, PartialEq)]
pub struct FiniteNetworkClass {
    pub members: Vec<ReluNetwork>,
    pub grid_step: f64,
    pub description: String,
}

impl FiniteNetworkClass {
    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }
}

/// Every parameter on `{-B, -B + step, …, B}`, filtered by the `S` budget.
pub fn enumerate_grid_class(
    spec: &ReluNetworkSpec,
    grid_step: f64,
    cap: usize,
) -> Result<FiniteNetworkClass> {
    enumerate_grid_class_with(spec, grid_step, cap, GridParams::All)
}

pub fn enumerate_grid_class_with(
    spec: &ReluNetworkSpec,
    grid_step: f64,
    cap: usize,
    which: GridParams,
) -> Result<FiniteNetworkClass> {
    spec.validate()?;
    if !(grid_step > 0.0 && grid_step.is_finite()) {
        return Err(invalid("grid_step", "must be a positive real"));
    }
    if !spec.bound.is_finite() {
        return Err(invalid(
            "bound",
            "grid enumeration needs a finite weight bound B",
        ));
    }
    let b = spec.bound;
    let levels: Vec<f64> = {
        let k = ((2.0 * b) / grid_step + 1e-9) as usize;
        (0..=k)
            .map(|i| {
                let v = -b + i as f64 * grid_step;
                if v.abs() < 1e-12 * grid_step {
                    0.0
                } else {
                    v
                }
            })
            .collect()
    };
    let template = ReluNetwork::zeros(*spec)?;
    let free: Vec<usize> = match which {
        GridParams::All => (0..template.param_count()).collect(),
        GridParams::WeightsOnly => template
            .slots()
            .iter()
            .flat_map(|s| s.weights_range())
            .collect(),
    };
    let required = (levels.len() as u128)
        .checked_pow(free.len() as u32)
        .unwrap_or(u128::MAX);
    if required > cap as u128 {
        return Err(Error::CapExceeded { required, cap });
    }
    let mut members = Vec::new();
    let mut digits = alloc::vec![0usize; free.len()];
    loop {
        let mut net = template.clone();
        for (&p, &d) in free.iter().zip(&digits) {
            net.params_mut()[p] = levels[d];
        }
        if check_constraints(&net).feasible() {
            members.push(net);
        }
        // odometer increment, last parameter fastest
        let mut i = digits.len();
        loop {
            if i == 0 {
                return Ok(FiniteNetworkClass {
                    members,
                    grid_step,
                    description: format!(
                        "grid class: {} free parameters on {} levels in [-{b}, {b}], S = {}",
                        free.len(),
                        levels.len(),
                        spec.sparsity
                    ),
                });
            }
            i -= 1;
            digits[i] += 1;
            if digits[i] < levels.len() {
                break;
            }
            digits[i] = 0;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_weight_grid_has_three_members() {
        let spec = ReluNetworkSpec::new(1, 1, 1, 1, f64::INFINITY, 1.0);
        let class = enumerate_grid_class_with(&spec, 1.0, 10, GridParams::WeightsOnly).unwrap();
        let ws: Vec<f64> = class.members.iter().map(|n| n.params()[0]).collect();
        assert_eq!(ws, [-1.0, 0.0, 1.0]);
    }

    #[test]
    fn two_parameters_under_unit_budget() {
        // |w| + |b| <= 1 on {-1,0,1}^2: (0,0), (±1,0), (0,±1)
        let spec = ReluNetworkSpec::new(1, 1, 1, 1, 1.0, 1.0);
        let class = enumerate_grid_class(&spec, 1.0, 10).unwrap();
        assert_eq!(class.len(), 5);
        assert!(class
            .members
            .iter()
            .all(|n| n.params()[0].abs() + n.params()[1].abs() <= 1.0));
    }

    #[test]
    fn cap_is_enforced() {
        let spec = ReluNetworkSpec::new(1, 1, 2, 1, 10.0, 1.0);
        match enumerate_grid_class(&spec, 0.5, 10) {
            Err(Error::CapExceeded { required, cap }) => assert_eq!((required, cap), (125, 10)),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn members_are_feasible() {
        let spec = ReluNetworkSpec::new(2, 1, 1, 1, 1.5, 1.0);
        let class = enumerate_grid_class(&spec, 0.5, DEFAULT_CLASS_CAP).unwrap();
        assert!(!class.is_empty());
        assert!(class
            .members
            .iter()
            .all(|n| check_constraints(n).feasible()));
    }
}
