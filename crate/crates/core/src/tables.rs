//! Pulse area and energy for the built-in protocols, in the layout of the
//! two reference tables (two-level and three-level).

use std::f64::consts::PI;

use crate::ancillary::{AncillaryScheme, Target};
use crate::descriptor::format_f64;
use crate::error::Result;
use crate::synthesis::{
    make_adiabatic_2l, make_stirap_3l, pulse_metrics, synth_three_level, synth_two_level, AlphaMode, Pulse,
    PulseMetrics,
};

#[derive(Debug, Clone, PartialEq)]
pub struct TableRow {
    pub protocol: String,
    pub params: String,
    pub area_pi: f64,
    pub energy_pi2: f64,
}

pub const TABLE_HEADER: &str = "protocol,params,A_pi,E_pi2hbar_over_T";

/// Controls for any catalog scheme, with α taken from the scheme when it
/// carries one and chosen for a real Rabi frequency otherwise.
pub fn pulse_for(s: &AncillaryScheme) -> Result<Pulse> {
    Ok(match s.target() {
        Target::TwoLevel => {
            let mode = if s.alpha(0.0).is_some() {
                AlphaMode::Scheme
            } else {
                AlphaMode::RealRabi
            };
            synth_two_level(s, mode)?.into()
        }
        Target::ThreeLevel => synth_three_level(s)?.into(),
    })
}

fn scheme_metrics(s: &AncillaryScheme) -> Result<PulseMetrics> {
    pulse_metrics(&pulse_for(s)?)
}

fn row(protocol: &str, params: String, m: PulseMetrics) -> TableRow {
    TableRow {
        protocol: protocol.to_string(),
        params,
        area_pi: m.area_pi,
        energy_pi2: m.energy_pi2,
    }
}

/// Two-level protocols. The adiabatic rows use the peak Rabi frequency
/// that matches the energy of the optimized scheme at the same ΔT.
pub fn table1() -> Result<Vec<TableRow>> {
    let t = 1.0;
    let mut rows = vec![
        row(
            "Flat pi pulse",
            String::new(),
            scheme_metrics(&AncillaryScheme::flat_pi(t)?)?,
        ),
        row(
            "Critical timing scheme",
            "eps=0.01".into(),
            scheme_metrics(&AncillaryScheme::arcsin_eps(t, 0.01)?)?,
        ),
        row(
            "Large Delta scheme",
            String::new(),
            scheme_metrics(&AncillaryScheme::quartic_large_delta(t)?)?,
        ),
    ];
    let optimized = [(1.0, 1.376, 14.927), (3.0, 1.266, 7.873)];
    let mut energies = Vec::new();
    for (dt, c0, c1) in optimized {
        let m = scheme_metrics(&AncillaryScheme::optimized_2l(t, c0, c1)?)?;
        energies.push((dt, m.energy_pi2));
        rows.push(row(
            "Numerically optimized scheme",
            format!("DeltaT={dt:.1};c0={c0:.3};c1={c1:.3}"),
            m,
        ));
    }
    for (dt, e) in energies {
        let omega0 = PI / t * (2.0 * e).sqrt();
        let m = pulse_metrics(&make_adiabatic_2l(t, omega0, 0.0)?.into())?;
        rows.push(row(
            "Adiabatic scheme",
            format!("DeltaT={dt:.1};Omega0T={}", format_f64(omega0 * t)),
            m,
        ));
    }
    Ok(rows)
}

/// Three-level protocols; STIRAP rows match the energy of numerical scheme 1.
pub fn table2() -> Result<Vec<TableRow>> {
    let t = 1.0;
    let mut rows = vec![row(
        "Reference scheme",
        "eps=0.002".into(),
        scheme_metrics(&AncillaryScheme::ref_3l(t, 0.002)?)?,
    )];
    let mut energies = Vec::new();
    for (dt, c0, c1) in [(1.0, -76.546, 49.040), (3.0, -76.735, 46.054)] {
        let m = scheme_metrics(&AncillaryScheme::num1_4l(t, c0, c1)?)?;
        energies.push((dt, m.energy_pi2));
        rows.push(row(
            "Numerical scheme 1",
            format!("DeltaT={dt:.1};c0={c0:.3};c1={c1:.3}"),
            m,
        ));
    }
    for (dt, d0, d1) in [(1.0, 0.794, -15.633), (3.0, 0.852, -13.204)] {
        let m = scheme_metrics(&AncillaryScheme::num2_4l(t, d0, d1)?)?;
        rows.push(row(
            "Numerical scheme 2",
            format!("DeltaT={dt:.1};d0={d0:.3};d1={d1:.3}"),
            m,
        ));
    }
    for (dt, e) in energies {
        let omega0 = PI / t * e.sqrt();
        let m = pulse_metrics(&make_stirap_3l(t, omega0)?.into())?;
        rows.push(row(
            "Adiabatic scheme",
            format!("DeltaT={dt:.1};Omega0T={}", format_f64(omega0 * t)),
            m,
        ));
    }
    Ok(rows)
}

pub fn table_csv(rows: &[TableRow]) -> String {
    let mut out = format!("{TABLE_HEADER}\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{}\n",
            r.protocol,
            r.params,
            format_f64(r.area_pi),
            format_f64(r.energy_pi2)
        ));
    }
    out
}
