use super::tape::{Tape, Var};
use crate::error::{Error, Result};

/// Tape handles for one LSTM cell.
///
/// `weight` is `[4H, I + H]` acting on `x ⊕ h_prev`; gate rows are ordered
/// input, forget, candidate, output.
#[derive(Clone, Copy, Debug)]
pub struct LstmVars {
    pub weight: Var,
    pub bias: Var,
}

/// One LSTM step, returning the new `(h, c)`.
pub fn lstm_step(
    tape: &mut Tape,
    x: Var,
    h_prev: Var,
    c_prev: Var,
    cell: &LstmVars,
) -> Result<(Var, Var)> {
    let hidden = tape.value(h_prev).len();
    if tape.value(c_prev).len() != hidden || tape.value(cell.bias).len() != 4 * hidden {
        return Err(Error::Shape {
            op: "lstm_step",
            lhs: tape.value(cell.bias).shape().to_vec(),
            rhs: vec![hidden],
        });
    }
    let input = tape.concat(&[x, h_prev], 0)?;
    let pre = tape.matvec(cell.weight, input)?;
    let pre = tape.add(pre, cell.bias)?;

    let i = tape.slice(pre, 0, hidden)?;
    let f = tape.slice(pre, hidden, hidden)?;
    let g = tape.slice(pre, 2 * hidden, hidden)?;
    let o = tape.slice(pre, 3 * hidden, hidden)?;
    let i = tape.sigmoid(i);
    let f = tape.sigmoid(f);
    let g = tape.tanh(g);
    let o = tape.sigmoid(o);

    let keep = tape.mul(f, c_prev)?;
    let write = tape.mul(i, g)?;
    let c = tape.add(keep, write)?;
    let squashed = tape.tanh(c);
    let h = tape.mul(o, squashed)?;
    Ok((h, c))
}
