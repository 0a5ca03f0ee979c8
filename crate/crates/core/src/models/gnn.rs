//! Message passing over a per-frame star graph centred on the robot.
//!
//! Nodes: the robot (goal pose plus occupancy embedding), the user (pose and
//! gaze, plus blend shapes when facial features are enabled) and one node
//! per pedestrian slot. Pedestrian messages are weighted by the presence
//! mask, so empty slots contribute nothing. Robot embeddings are averaged
//! over the frames before the output heads.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{FeatureSet, ModelInput, BLEND, GAZE, GOAL, MASK, MAX_PEDESTRIANS, PEDS, USER};
use crate::models::common::{dropout, Linear, N_LOGITS};
use crate::models::conv::{OccEncoder, OCC_EMBEDDING};
use crate::nn::{Graph, ParamSet, Tensor, Var};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Round {
    pub msg_user: Linear,
    pub msg_ped: Linear,
    pub self_robot: Linear,
    pub agg_robot: Linear,
    pub leaf_user: Linear,
    pub leaf_ped: Linear,
    pub leaf_from_robot: Linear,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Gnn {
    pub set: FeatureSet,
    pub hidden: usize,
    pub occ: OccEncoder,
    pub enc_robot: Linear,
    pub enc_occ: Linear,
    pub enc_user: Linear,
    pub enc_ped: Linear,
    pub rounds: Vec<Round>,
    pub head: Linear,
    pub dropout: f64,
    /// Drop the nonlinearities (used to check the aggregation in closed form).
    pub linear: bool,
}

fn user_width(set: FeatureSet) -> usize {
    USER.len() + GAZE.len() + if set.uses_blend() { BLEND.len() } else { 0 }
}

impl Gnn {
    #[allow(clippy::too_many_arguments)]
    pub fn new<R: Rng + ?Sized>(
        ps: &mut ParamSet,
        set: FeatureSet,
        crop_cells: usize,
        hidden: usize,
        rounds: usize,
        dropout: f64,
        rng: &mut R,
    ) -> Result<Self> {
        if !set.uses_occupancy() {
            return Err(Error::InvalidFeatureSet(format!("{set} (a graph over facial features alone has no structure)")));
        }
        let occ = OccEncoder::new(ps, crop_cells, rng);
        let enc_robot = Linear::new(ps, "gnn.enc_robot", GOAL.len(), hidden, rng);
        let enc_occ = Linear::new(ps, "gnn.enc_occ", OCC_EMBEDDING, hidden, rng);
        let enc_user = Linear::new(ps, "gnn.enc_user", user_width(set), hidden, rng);
        let enc_ped = Linear::new(ps, "gnn.enc_ped", 3, hidden, rng);
        let rounds = (0..rounds)
            .map(|r| {
                let mut l = |name: &str| Linear::new(ps, &format!("gnn.r{r}.{name}"), hidden, hidden, rng);
                Round {
                    msg_user: l("msg_user"),
                    msg_ped: l("msg_ped"),
                    self_robot: l("self_robot"),
                    agg_robot: l("agg_robot"),
                    leaf_user: l("leaf_user"),
                    leaf_ped: l("leaf_ped"),
                    leaf_from_robot: l("leaf_from_robot"),
                }
            })
            .collect();
        let head = Linear::new(ps, "gnn.head", hidden, N_LOGITS, rng);
        Ok(Gnn { set, hidden, occ, enc_robot, enc_occ, enc_user, enc_ped, rounds, head, dropout, linear: false })
    }

    fn act(&self, g: &mut Graph, x: Var) -> Var {
        if self.linear {
            x
        } else {
            g.relu(x)
        }
    }

    /// Columns of raw channels `range` from every frame of every input.
    fn gather(inputs: &[&ModelInput], range: std::ops::Range<usize>) -> Tensor {
        let rows: usize = inputs.iter().map(|x| x.frames).sum();
        let mut data = Vec::with_capacity(rows * range.len());
        for x in inputs {
            let start = x.column(range.start).expect("channel selected by feature set");
            for k in 0..x.frames {
                data.extend_from_slice(&x.row(k)[start..start + range.len()]);
            }
        }
        Tensor::from_vec(rows, range.len(), data)
    }

    /// Robot-node embeddings for every frame, `(batch * frames) x hidden`.
    pub fn robot_states(&self, g: &mut Graph, inputs: &[&ModelInput]) -> Result<Var> {
        if inputs.iter().any(|x| x.set != self.set) {
            return Err(Error::InvalidFeatureSet(format!("model expects {}", self.set)));
        }
        let frames = inputs[0].frames;
        if inputs.iter().any(|x| x.frames != frames) {
            return Err(Error::LengthMismatch { what: "window frames", expected: frames, actual: 0 });
        }
        let crops: Vec<&[f64]> = inputs.iter().map(|x| x.crop.as_deref().expect("occupancy crop")).collect();
        let occ = self.occ.forward(g, &crops);
        let occ = self.enc_occ.forward(g, occ);
        let occ = g.repeat_rows(occ, frames);

        let goal = g.input(Self::gather(inputs, GOAL));
        let r = self.enc_robot.forward(g, goal);
        let r = g.add(r, occ);
        let mut robot = self.act(g, r);

        let mut user_t = Self::gather(inputs, USER);
        let gaze = Self::gather(inputs, GAZE);
        let mut parts = vec![user_t.clone(), gaze];
        if self.set.uses_blend() {
            parts.push(Self::gather(inputs, BLEND));
        }
        user_t = concat_tensors(&parts);
        let u = g.input(user_t);
        let u = self.enc_user.forward(g, u);
        let mut user = self.act(g, u);

        let masks = Self::gather(inputs, MASK);
        let pose_block = Self::gather(inputs, PEDS);
        let mut peds = Vec::with_capacity(MAX_PEDESTRIANS);
        let mut mask_cols = Vec::with_capacity(MAX_PEDESTRIANS);
        for k in 0..MAX_PEDESTRIANS {
            let mut t = Tensor::zeros(pose_block.rows(), 3);
            for r in 0..pose_block.rows() {
                t.row_mut(r).copy_from_slice(&pose_block.row(r)[3 * k..3 * k + 3]);
            }
            let p = g.input(t);
            let p = self.enc_ped.forward(g, p);
            peds.push(self.act(g, p));
            mask_cols.push((0..masks.rows()).map(|r| masks.get(r, k)).collect::<Vec<f64>>());
        }

        for (i, round) in self.rounds.iter().enumerate() {
            let mu = round.msg_user.forward(g, user);
            let mut agg = self.act(g, mu);
            for (p, m) in peds.iter().zip(&mask_cols) {
                let mp = round.msg_ped.forward(g, *p);
                let mp = self.act(g, mp);
                let mp = g.scale_rows(mp, m.clone());
                agg = g.add(agg, mp);
            }
            let s = round.self_robot.forward(g, robot);
            let a = round.agg_robot.forward(g, agg);
            let next_robot = g.add(s, a);
            let next_robot = self.act(g, next_robot);
            if i + 1 < self.rounds.len() {
                let from_robot = round.leaf_from_robot.forward(g, robot);
                let lu = round.leaf_user.forward(g, user);
                let lu = g.add(lu, from_robot);
                user = self.act(g, lu);
                for p in peds.iter_mut() {
                    let lp = round.leaf_ped.forward(g, *p);
                    let lp = g.add(lp, from_robot);
                    *p = self.act(g, lp);
                }
            }
            robot = next_robot;
        }
        Ok(robot)
    }

    pub fn forward(&self, g: &mut Graph, inputs: &[&ModelInput], rng: Option<&mut ChaCha8Rng>) -> Result<Var> {
        let robot = self.robot_states(g, inputs)?;
        let pooled = g.mean_groups(robot, inputs[0].frames);
        let pooled = dropout(g, pooled, self.dropout, rng);
        Ok(self.head.forward(g, pooled))
    }
}

fn concat_tensors(parts: &[Tensor]) -> Tensor {
    let rows = parts[0].rows();
    let cols: usize = parts.iter().map(Tensor::cols).sum();
    let mut out = Tensor::zeros(rows, cols);
    for r in 0..rows {
        let mut off = 0;
        for p in parts {
            out.row_mut(r)[off..off + p.cols()].copy_from_slice(p.row(r));
            off += p.cols();
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::testutil::{check_gradients, randomize, toy_input};
    use rand::SeedableRng;

    fn model(set: FeatureSet, rounds: usize, seed: u64) -> (ParamSet, Gnn, ChaCha8Rng) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut ps = ParamSet::new();
        let gnn = Gnn::new(&mut ps, set, 16, 6, rounds, 0.0, &mut rng).unwrap();
        randomize(&mut ps, &mut rng, 0.5);
        (ps, gnn, rng)
    }

    fn logits(ps: &ParamSet, gnn: &Gnn, x: &ModelInput) -> Tensor {
        let mut g = Graph::new(ps);
        let out = gnn.forward(&mut g, &[x], None).unwrap();
        g.value(out).clone()
    }

    fn set_mask(x: &mut ModelInput, slot: usize, on: bool) {
        let c = x.column(MASK.start + slot).unwrap();
        for k in 0..x.frames {
            x.seq[k * x.width + c] = if on { 1.0 } else { 0.0 };
        }
    }

    #[test]
    fn facial_only_is_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut ps = ParamSet::new();
        let r = Gnn::new(&mut ps, FeatureSet::FacialOnly, 16, 8, 2, 0.0, &mut rng);
        assert!(matches!(r, Err(Error::InvalidFeatureSet(_))));
    }

    #[test]
    fn masked_slots_are_ignored() {
        let (ps, gnn, mut rng) = model(FeatureSet::NavOnly, 2, 1);
        let mut x = toy_input(FeatureSet::NavOnly, &mut rng);
        for s in 0..MAX_PEDESTRIANS {
            set_mask(&mut x, s, false);
        }
        let base = logits(&ps, &gnn, &x);
        let p0 = x.column(PEDS.start).unwrap();
        for k in 0..x.frames {
            for j in 0..3 * MAX_PEDESTRIANS {
                x.seq[k * x.width + p0 + j] = rng.random_range(-5.0..5.0);
            }
        }
        assert_eq!(logits(&ps, &gnn, &x), base);
    }

    #[test]
    fn permuting_pedestrians_keeps_logits() {
        let (ps, gnn, mut rng) = model(FeatureSet::NavPlusFacial, 2, 2);
        let mut x = toy_input(FeatureSet::NavPlusFacial, &mut rng);
        for s in 0..MAX_PEDESTRIANS {
            set_mask(&mut x, s, s < 3);
        }
        let a = logits(&ps, &gnn, &x);
        let p0 = x.column(PEDS.start).unwrap();
        for k in 0..x.frames {
            let row = &mut x.seq[k * x.width + p0..k * x.width + p0 + 9];
            let (first, rest) = row.split_at_mut(3);
            first.swap_with_slice(&mut rest[3..6]);
        }
        let b = logits(&ps, &gnn, &x);
        assert!(a.max_abs_diff(&b) < 1e-12);
    }

    #[test]
    fn single_linear_round_matches_closed_form() {
        let (ps, mut gnn, mut rng) = model(FeatureSet::NavOnly, 1, 3);
        gnn.linear = true;
        let mut x = toy_input(FeatureSet::NavOnly, &mut rng);
        for s in 0..MAX_PEDESTRIANS {
            set_mask(&mut x, s, s % 2 == 0);
        }
        let mut g = Graph::new(&ps);
        let states = gnn.robot_states(&mut g, &[&x]).unwrap();
        let occ = {
            let e = gnn.occ.forward(&mut g, &[x.crop.as_deref().unwrap()]);
            let e = gnn.enc_occ.forward(&mut g, e);
            g.value(e).row(0).to_vec()
        };
        let lin = |l: &Linear, v: &[f64]| -> Vec<f64> {
            let (w, b) = (ps.get(l.w), ps.get(l.b));
            (0..w.cols()).map(|j| b.get(0, j) + v.iter().enumerate().map(|(i, x)| x * w.get(i, j)).sum::<f64>()).collect()
        };
        let add = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x + y).collect::<Vec<f64>>();
        let r0 = &gnn.rounds[0];
        for k in 0..x.frames {
            let row = x.row(k);
            let col = |c: usize| x.column(c).unwrap();
            let robot = add(&lin(&gnn.enc_robot, &row[col(GOAL.start)..col(GOAL.start) + 3]), &occ);
            let user_in = [&row[col(USER.start)..col(USER.start) + 3], &row[col(GAZE.start)..col(GAZE.start) + 3]].concat();
            let mut agg = lin(&r0.msg_user, &lin(&gnn.enc_user, &user_in));
            for s in 0..MAX_PEDESTRIANS {
                let m = row[col(MASK.start + s)];
                let p = lin(&gnn.enc_ped, &row[col(PEDS.start) + 3 * s..col(PEDS.start) + 3 * s + 3]);
                let msg = lin(&r0.msg_ped, &p);
                agg = agg.iter().zip(&msg).map(|(a, v)| a + m * v).collect();
            }
            let want = add(&lin(&r0.self_robot, &robot), &lin(&r0.agg_robot, &agg));
            for (j, w) in want.iter().enumerate() {
                assert!((g.value(states).get(k, j) - w).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn gradients_match_finite_differences() {
        let (ps, gnn, mut rng) = model(FeatureSet::NavPlusFacial, 2, 4);
        let xs = [toy_input(FeatureSet::NavPlusFacial, &mut rng), toy_input(FeatureSet::NavPlusFacial, &mut rng)];
        let r = check_gradients(&ps, |g| gnn.forward(g, &[&xs[0], &xs[1]], None).unwrap(), &mut rng);
        assert!(r.checked >= 100 && r.max_relative_error < 1e-4, "{r:?}");
    }
}
