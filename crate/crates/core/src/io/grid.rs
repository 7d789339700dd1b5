//! Plot-ready CSV for the two simulation curves.

use crate::simulate::experiment::GridPoint;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Curve {
    /// Error against the number of campaigns.
    CampaignCount,
    /// Error against the noise amplitude.
    Noise,
}

pub fn format_grid(points: &[GridPoint], curve: Curve) -> String {
    let x_name = match curve {
        Curve::CampaignCount => "num_campaigns",
        Curve::Noise => "zeta",
    };
    let mut s = format!("profile,{x_name},mean_abs_err_alpha1,trials_ok,trials_failed\n");
    for p in points {
        let x = match curve {
            Curve::CampaignCount => p.num_campaigns.to_string(),
            Curve::Noise => format!("{:?}", p.zeta),
        };
        s.push_str(&format!(
            "{},{x},{:?},{},{}\n",
            p.profile, p.mean_abs_err_alpha1, p.trials_ok, p.trials_failed
        ));
    }
    s
}
