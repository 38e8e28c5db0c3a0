use crate::jobshop::{JobShopInstance, Schedule};

/// One line per machine, jobs as `[J<n>:start–end]` in start order, 1-based labels.
pub fn render_gantt(inst: &JobShopInstance, schedule: &Schedule) -> String {
    let mut out = String::new();
    for m in 0..inst.machines {
        let mut jobs: Vec<usize> = (0..schedule.machine.len()).filter(|&i| schedule.machine[i] == m).collect();
        jobs.sort_by(|&a, &b| schedule.start[a].total_cmp(&schedule.start[b]).then(a.cmp(&b)));
        out.push_str(&format!("M{}", m + 1));
        for i in jobs {
            out.push_str(&format!(" [J{}:{}–{}]", i + 1, schedule.start[i], schedule.end(inst, i)));
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_jobs_and_an_empty_machine() {
        let inst = JobShopInstance {
            jobs: 2,
            machines: 2,
            cost: vec![vec![1.0, 1.0]; 2],
            processing: vec![vec![3.0, 3.0]; 2],
            release: vec![0.0; 2],
            due: vec![20.0; 2],
        };
        let s = Schedule {
            machine: vec![0, 0],
            start: vec![5.0, 0.0],
            precedes: vec![(1, 0)],
        };
        assert_eq!(render_gantt(&inst, &s), "M1 [J2:0–3] [J1:5–8]\nM2\n");
        let s = Schedule {
            machine: vec![0, 0],
            start: vec![0.0, 5.0],
            precedes: vec![(0, 1)],
        };
        assert_eq!(render_gantt(&inst, &s).lines().next().unwrap(), "M1 [J1:0–3] [J2:5–8]");
    }
}
