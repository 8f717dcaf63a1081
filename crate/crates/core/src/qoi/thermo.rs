use std::io::{Read, Write};

use crate::error::{Error, Result};

/// Universal gas constant, J/(mol·K).
pub const GAS_CONSTANT: f64 = 8.314;

/// Temperature (K) at which the heat-capacity fits switch to the high-T row.
pub const SWITCH_TEMPERATURE: f64 = 1000.0;

/// Polynomial heat-capacity fit `Cp = R/Mw · (A + B T + C T² + D T³ + E T⁴)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GasSpecies {
    pub name: &'static str,
    /// kg/mol.
    pub molecular_weight: f64,
    /// Coefficients for `T < 1000 K`.
    pub low: [f64; 5],
    /// Coefficients for `T ≥ 1000 K`.
    pub high: [f64; 5],
}

/// O2, N2, CO, CO2, H2O in the order used for mole-fraction vectors.
pub const SPECIES: [GasSpecies; 5] = [
    GasSpecies {
        name: "O2",
        molecular_weight: 31.9988e-3,
        low: [3.7825, -2.9970e-3, 9.8473e-6, -9.6813e-9, 3.2437e-12],
        high: [3.6610, 6.5637e-4, -1.4115e-7, 2.0580e-11, -1.2991e-15],
    },
    GasSpecies {
        name: "N2",
        molecular_weight: 28.0134e-3,
        low: [3.5310, -1.2366e-4, -5.0300e-7, 2.4353e-9, -1.4088e-12],
        high: [2.9526, 1.3969e-3, -4.9263e-7, 7.8601e-11, -4.6076e-15],
    },
    GasSpecies {
        name: "CO",
        molecular_weight: 28.0104e-3,
        low: [3.5795, -6.1035e-4, 1.0168e-6, 9.0701e-10, -9.0442e-13],
        high: [3.0485, 1.3517e-3, -4.8579e-7, 7.8854e-11, -4.6981e-15],
    },
    GasSpecies {
        name: "CO2",
        molecular_weight: 44.0098e-3,
        low: [2.3568, 8.9841e-3, -7.1221e-6, 2.4573e-9, -1.4289e-13],
        high: [4.6365, 2.7415e-3, -9.9590e-7, 1.6039e-10, -9.1620e-15],
    },
    GasSpecies {
        name: "H2O",
        molecular_weight: 18.0153e-3,
        low: [4.1986, -2.0364e-3, 6.5203e-6, -5.4879e-9, 1.7720e-12],
        high: [2.6770, 2.9732e-3, -7.7377e-7, 9.4434e-11, -4.2690e-15],
    },
];

const FRACTION_TOL: f64 = 1e-6;

/// Specific heat capacity in J/(kg·K).
pub fn cp_species(species: &GasSpecies, t: f64) -> Result<f64> {
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::NonPositiveTemperature(t));
    }
    let c = if t < SWITCH_TEMPERATURE {
        &species.low
    } else {
        &species.high
    };
    let poly = c[0] + t * (c[1] + t * (c[2] + t * (c[3] + t * c[4])));
    Ok(GAS_CONSTANT / species.molecular_weight * poly)
}

/// Mole-fraction weighted mixture heat capacity, J/(kg·K).
pub fn cp_mixture(fractions: &[f64; 5], t: f64, table: &[GasSpecies; 5]) -> Result<f64> {
    if fractions.iter().any(|y| !(y.is_finite() && *y >= 0.0)) {
        return Err(Error::FractionSumViolation(fractions.iter().sum()));
    }
    let sum: f64 = fractions.iter().sum();
    if (sum - 1.0).abs() > FRACTION_TOL {
        return Err(Error::FractionSumViolation(sum));
    }
    let mut cp = 0.0;
    for (y, s) in fractions.iter().zip(table) {
        cp += y * cp_species(s, t)?;
    }
    Ok(cp)
}

/// One time sample of reactor outlet conditions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OutletRecord {
    /// s
    pub t: f64,
    /// Cross-section averaged gas temperature, K.
    pub t_avg: f64,
    /// Gas mass flow rate, kg/s.
    pub mdot: f64,
    /// Mole fractions of O2, N2, CO, CO2, H2O.
    pub fractions: [f64; 5],
}

impl OutletRecord {
    /// Instantaneous thermal power `Cp · ṁ · T`, W.
    pub fn power(&self) -> Result<f64> {
        Ok(cp_mixture(&self.fractions, self.t_avg, &SPECIES)? * self.mdot * self.t_avg)
    }
}

/// Trapezoidal integral of samples `y` on the grid `t`.
pub fn trapezoid(t: &[f64], y: &[f64]) -> Result<f64> {
    if t.len() != y.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} time stamps for {} values",
            t.len(),
            y.len()
        )));
    }
    if t.len() < 2 {
        return Err(Error::InsufficientRecords(t.len()));
    }
    if let Some(i) = (1..t.len()).find(|&i| !(t[i] >= t[i - 1])) {
        return Err(Error::NonMonotoneTime(i));
    }
    Ok(t.windows(2)
        .zip(y.windows(2))
        .map(|(tw, yw)| 0.5 * (tw[1] - tw[0]) * (yw[0] + yw[1]))
        .sum())
}

/// Thermal energy `∫ Cp ṁ T_avg dt` over the record grid, J.
pub fn thermal_energy(series: &[OutletRecord]) -> Result<f64> {
    if series.len() < 2 {
        return Err(Error::InsufficientRecords(series.len()));
    }
    let t: Vec<f64> = series.iter().map(|r| r.t).collect();
    let p = series.iter().map(OutletRecord::power).collect::<Result<Vec<_>>>()?;
    trapezoid(&t, &p)
}

const OUTLET_HEADER: [&str; 8] = ["t", "T_avg", "mdot", "y_O2", "y_N2", "y_CO", "y_CO2", "y_H2O"];

/// Reads `t,T_avg,mdot,y_O2,y_N2,y_CO,y_CO2,y_H2O` records.
pub fn read_outlet_csv<R: Read>(reader: R) -> Result<Vec<OutletRecord>> {
    let rows = super::dataset::read_numeric_csv(reader, &OUTLET_HEADER)?;
    rows.into_iter()
        .map(|(line, v)| {
            if !(v[1] > 0.0) {
                return Err(Error::Schema {
                    line,
                    message: format!("T_avg must be positive, got {}", v[1]),
                });
            }
            Ok(OutletRecord {
                t: v[0],
                t_avg: v[1],
                mdot: v[2],
                fractions: [v[3], v[4], v[5], v[6], v[7]],
            })
        })
        .collect()
}

pub fn write_outlet_csv<W: Write>(writer: W, series: &[OutletRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let io = |e: csv::Error| Error::Io(e.to_string());
    w.write_record(OUTLET_HEADER).map_err(io)?;
    for r in series {
        let mut row = vec![r.t.to_string(), r.t_avg.to_string(), r.mdot.to_string()];
        row.extend(r.fractions.iter().map(|y| y.to_string()));
        w.write_record(&row).map_err(io)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn oxygen_at_room_temperature() {
        let t: f64 = 300.0;
        let c = [3.7825, -2.9970e-3, 9.8473e-6, -9.6813e-9, 3.2437e-12];
        let direct = 8.314 / 0.0319988 * (c[0] + c[1] * t + c[2] * t.powi(2) + c[3] * t.powi(3) + c[4] * t.powi(4));
        let cp = cp_species(&SPECIES[0], t).unwrap();
        assert!((cp - direct).abs() < 1e-9 * direct);
        assert!((cp - 918.4).abs() < 1.0, "{cp}");
    }

    #[test]
    fn regime_switch() {
        let o2 = &SPECIES[0];
        let t: f64 = 1500.0;
        let c = o2.high;
        let direct =
            8.314 / o2.molecular_weight * (c[0] + c[1] * t + c[2] * t.powi(2) + c[3] * t.powi(3) + c[4] * t.powi(4));
        assert!((cp_species(o2, t).unwrap() - direct).abs() < 1e-9 * direct);
        for s in &SPECIES {
            let below = cp_species(s, 1000.0 - 1e-6).unwrap();
            let above = cp_species(s, 1000.0 + 1e-6).unwrap();
            assert!((below - above).abs() / above < 0.01, "{}", s.name);
        }
    }

    #[test]
    fn positive_over_range() {
        for s in &SPECIES {
            for k in 0..=280 {
                let t = 200.0 + 10.0 * k as f64;
                assert!(cp_species(s, t).unwrap() > 0.0);
            }
        }
        assert!(matches!(
            cp_species(&SPECIES[0], 0.0),
            Err(Error::NonPositiveTemperature(_))
        ));
    }

    #[test]
    fn mixture_rules() {
        let t = 850.0;
        let pure = cp_mixture(&[1.0, 0.0, 0.0, 0.0, 0.0], t, &SPECIES).unwrap();
        assert_eq!(pure, cp_species(&SPECIES[0], t).unwrap());

        let eq = cp_mixture(&[0.2; 5], t, &SPECIES).unwrap();
        let mean: f64 = SPECIES.iter().map(|s| cp_species(s, t).unwrap()).sum::<f64>() / 5.0;
        assert!((eq - mean).abs() < 1e-12 * mean);

        let air = cp_mixture(&[0.21, 0.79, 0.0, 0.0, 0.0], 300.0, &SPECIES).unwrap();
        let direct = 0.21 * cp_species(&SPECIES[0], 300.0).unwrap() + 0.79 * cp_species(&SPECIES[1], 300.0).unwrap();
        assert!((air - direct).abs() < 1e-12 * direct);

        let a = [0.1, 0.6, 0.1, 0.1, 0.1];
        let b = [0.3, 0.3, 0.2, 0.1, 0.1];
        let mid: [f64; 5] = std::array::from_fn(|i| 0.5 * (a[i] + b[i]));
        let lhs = cp_mixture(&mid, t, &SPECIES).unwrap();
        let rhs = 0.5 * (cp_mixture(&a, t, &SPECIES).unwrap() + cp_mixture(&b, t, &SPECIES).unwrap());
        assert!((lhs - rhs).abs() < 1e-12 * rhs);

        assert!(matches!(
            cp_mixture(&[0.5, 0.4, 0.0, 0.0, 0.0], t, &SPECIES),
            Err(Error::FractionSumViolation(_))
        ));
    }

    #[test]
    fn trapezoid_cases() {
        let t: Vec<f64> = (0..=10).map(f64::from).collect();
        assert_eq!(trapezoid(&t, &[1.0; 11]).unwrap(), 10.0);
        assert_eq!(trapezoid(&t, &t).unwrap(), 50.0);
        assert!(matches!(trapezoid(&[0.0], &[1.0]), Err(Error::InsufficientRecords(1))));
        assert!(matches!(
            trapezoid(&[0.0, 2.0, 1.0], &[1.0; 3]),
            Err(Error::NonMonotoneTime(2))
        ));
    }

    fn series(n: usize) -> Vec<OutletRecord> {
        // T(t) = 800 + 20 t keeps the low-T row; ṁ = 0.01 (1 + 0.05 t).
        (0..=n)
            .map(|k| {
                let t = 10.0 * k as f64 / n as f64;
                OutletRecord {
                    t,
                    t_avg: 800.0 + 20.0 * t,
                    mdot: 0.01 * (1.0 + 0.05 * t),
                    fractions: [0.21, 0.79, 0.0, 0.0, 0.0],
                }
            })
            .collect()
    }

    #[test]
    fn thermal_energy_against_closed_form() {
        // Integrand is a polynomial in t; integrate it exactly by expanding
        // Cp(T(t)) ṁ(t) T(t) with Gauss–Legendre of sufficient order.
        let integrand = |t: f64| {
            let temp = 800.0 + 20.0 * t;
            let mdot = 0.01 * (1.0 + 0.05 * t);
            let mut cp = 0.0;
            for (y, s) in [(0.21, &SPECIES[0]), (0.79, &SPECIES[1])] {
                let c = s.low;
                let p = c[0] + c[1] * temp + c[2] * temp.powi(2) + c[3] * temp.powi(3) + c[4] * temp.powi(4);
                cp += y * 8.314 / s.molecular_weight * p;
            }
            cp * mdot * temp
        };
        let exact = crate::quadrature::GaussLegendre::new(16).integrate(0.0, 10.0, integrand);
        let q = thermal_energy(&series(1000)).unwrap();
        assert!((q - exact).abs() < 1e-3 * exact);
    }

    #[test]
    fn thermal_energy_is_additive() {
        let s = series(100);
        let whole = thermal_energy(&s).unwrap();
        let parts = thermal_energy(&s[..=40]).unwrap() + thermal_energy(&s[40..]).unwrap();
        assert!((whole - parts).abs() < 1e-12 * whole);
    }

    #[test]
    fn outlet_csv_round_trip() {
        let s = series(5);
        let mut buf = Vec::new();
        write_outlet_csv(&mut buf, &s).unwrap();
        assert_eq!(read_outlet_csv(buf.as_slice()).unwrap(), s);
        let bad = "t,T_avg,mdot,y_O2,y_N2,y_CO,y_CO2,y_H2O\n0,300,1,1,0,0,0\n";
        assert!(matches!(
            read_outlet_csv(bad.as_bytes()),
            Err(Error::Schema { line: 2, .. })
        ));
    }
}
