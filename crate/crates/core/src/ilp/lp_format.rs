//! CPLEX LP text dump of an instance, for cross-checking with external solvers.
//!
//! Layout, in this order:
//!
//! ```text
//! \ flexnr <P0|P1> instance: <V> variables, <D> demand rows, <S> slot rows
//! Maximize
//!  obj: <c> x_<b>_<k> + ...          (nonzero coefficients, variable order)
//! Subject To
//!  urllc_<k>: <r> x_<b>_<k> + ... >= <q_k>   (P0)  or  <= <q'_k>  (P1), by user id
//!  slot_<i>: x_<b>_<k> + ... <= 1            (by mini-slot index, empty rows omitted)
//! Binary
//!  x_<b>_<k>                                 (variable order)
//! End
//! ```
//!
//! Numbers use Rust's shortest round-trip `f64` formatting. Rows wrap every
//! eight terms onto indented continuation lines. A demand row with no terms is
//! written as a `\` comment since it has no variables to constrain.

use std::io::{self, Write};

use super::{IlpInstance, Sense};

const TERMS_PER_LINE: usize = 8;

fn var_name(inst: &IlpInstance, v: usize) -> String {
    let var = inst.variables[v];
    format!("x_{}_{}", var.block, var.user)
}

fn write_terms<W: Write>(out: &mut W, terms: &[String]) -> io::Result<()> {
    for (i, term) in terms.iter().enumerate() {
        if i > 0 {
            if i % TERMS_PER_LINE == 0 {
                write!(out, "\n   + ")?;
            } else {
                write!(out, " + ")?;
            }
        }
        write!(out, "{term}")?;
    }
    Ok(())
}

pub(super) fn write_lp<W: Write>(inst: &IlpInstance, out: &mut W) -> io::Result<()> {
    let slot_rows = inst.overlap.iter().filter(|row| !row.is_empty()).count();
    writeln!(
        out,
        "\\ flexnr {} instance: {} variables, {} demand rows, {} slot rows",
        inst.formulation,
        inst.variables.len(),
        inst.demand_constraints.len(),
        slot_rows
    )?;

    writeln!(out, "Maximize")?;
    let obj_terms: Vec<String> = inst
        .objective
        .iter()
        .enumerate()
        .filter(|(_, c)| **c != 0.0)
        .map(|(v, c)| format!("{c} {}", var_name(inst, v)))
        .collect();
    write!(out, " obj: ")?;
    write_terms(out, &obj_terms)?;
    writeln!(out)?;

    writeln!(out, "Subject To")?;
    for row in &inst.demand_constraints {
        let op = match row.sense {
            Sense::AtLeast => ">=",
            Sense::AtMost => "<=",
        };
        if row.terms.is_empty() {
            writeln!(
                out,
                "\\ urllc_{}: no admissible blocks, 0 {op} {}",
                row.user, row.bound_kbps
            )?;
            continue;
        }
        let terms: Vec<String> = row
            .terms
            .iter()
            .map(|&(v, r)| format!("{r} {}", var_name(inst, v)))
            .collect();
        write!(out, " urllc_{}: ", row.user)?;
        write_terms(out, &terms)?;
        writeln!(out, " {op} {}", row.bound_kbps)?;
    }
    for (slot, row) in inst.overlap.iter().enumerate() {
        if row.is_empty() {
            continue;
        }
        let terms: Vec<String> = row.iter().map(|&v| var_name(inst, v)).collect();
        write!(out, " slot_{slot}: ")?;
        write_terms(out, &terms)?;
        writeln!(out, " <= 1")?;
    }

    writeln!(out, "Binary")?;
    for v in 0..inst.variables.len() {
        writeln!(out, " {}", var_name(inst, v))?;
    }
    writeln!(out, "End")
}
