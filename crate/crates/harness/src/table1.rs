use serde::Serialize;
use vlpl_core::objective::{brute_force_optimal, ranking_reward};

use crate::error::Result;
use crate::fixtures::{self, PRINT_TOL};

#[derive(Debug, Clone, Serialize)]
pub struct Cell {
    pub exposure: String,
    pub column: String,
    pub reward: f64,
    pub printed: f64,
    pub ok: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct Optimum {
    pub exposure: String,
    pub ranking: String,
    pub reward: f64,
    pub expected: String,
    pub ok: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct Table1Report {
    pub cells: Vec<Cell>,
    pub optima: Vec<Optimum>,
    pub passed: bool,
}

pub fn cmd_table1() -> Result<Table1Report> {
    let attract = fixtures::attract(0.6);
    let config = fixtures::config();
    let mut cells = Vec::new();
    let mut optima = Vec::new();
    for (name, exposure, printed, best) in [
        ("theta1", fixtures::theta1(), fixtures::PRINTED_THETA1, "AAB"),
        ("theta2", fixtures::theta2(), fixtures::PRINTED_THETA2, "BAA"),
    ] {
        for ((column, ranking), want) in fixtures::columns().into_iter().zip(printed) {
            let reward = ranking_reward(&ranking, &attract, &exposure)?.value;
            cells.push(Cell {
                exposure: name.into(),
                column: column.into(),
                reward,
                printed: want,
                ok: (reward - want).abs() <= PRINT_TOL,
            });
        }
        let (ranking, reward) = brute_force_optimal(&attract, &exposure, &config)?;
        let label = fixtures::label(&ranking);
        optima.push(Optimum {
            exposure: name.into(),
            ok: label == best,
            ranking: label,
            reward,
            expected: best.into(),
        });
    }
    let passed = cells.iter().all(|c| c.ok) && optima.iter().all(|o| o.ok);
    Ok(Table1Report { cells, optima, passed })
}
