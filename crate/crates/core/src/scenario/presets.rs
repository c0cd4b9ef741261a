use super::config::RawConfig;

/// A named, fully specified scenario.
#[derive(Debug, Clone, Copy)]
pub struct Preset {
    pub name: &'static str,
    pub description: &'static str,
    pub toml: &'static str,
}

impl Preset {
    pub fn raw(&self) -> RawConfig {
        RawConfig::parse(self.toml, self.name).expect("built-in presets parse")
    }
}

static PRESETS: [Preset; 9] = [
    Preset {
        name: "ex_unbounded_complete",
        description: "unbounded beliefs, complete network, singletons, truth-seeking: learning converges to the truth",
        toml: concat!(
            "[signal]\nfamily = \"linear_symmetric\"\n",
            "[payoff]\nform = \"linear\"\nbase = 0.1\nmatch_bonus = 1\nbeta = 0.25\n",
            "[observation]\nscheme = \"complete\"\n",
            "[strategy]\nkind = \"truth_seeking\"\n",
            "[simulation]\nhorizon = 500\nreplications = 10000\nseed = 1\nsize = 1\n",
        ),
    },
    Preset {
        name: "ex_bounded_singleton",
        description: "bounded beliefs, complete network, singletons, truth-seeking: herds form and accuracy plateaus below 1",
        toml: concat!(
            "[signal]\nfamily = \"bounded_mixture\"\nlambda = 0.5\n",
            "[payoff]\nform = \"linear\"\nbase = 0.1\nmatch_bonus = 1\nbeta = 0.25\n",
            "[observation]\nscheme = \"complete\"\n",
            "[strategy]\nkind = \"truth_seeking\"\n",
            "[simulation]\nhorizon = 500\nreplications = 10000\nseed = 1\nsize = 1\n",
        ),
    },
    Preset {
        name: "thm1_bounded",
        description: "bounded beliefs, complete network, communities at the conformity threshold, epsilon-cutoff profile (epsilon 0.05): observation becomes truth-telling",
        toml: concat!(
            "[signal]\nfamily = \"bounded_mixture\"\nlambda = 0.5\n",
            "[payoff]\nform = \"linear\"\nbase = 0.1\nmatch_bonus = 1\nbeta = 0.25\n",
            "[observation]\nscheme = \"complete\"\n",
            "[strategy]\nkind = \"cutoff\"\nepsilon = 0.05\n",
            "[simulation]\nhorizon = 500\nreplications = 10000\nseed = 1\nsize = 5\n",
        ),
    },
    Preset {
        name: "thm2_singleton_endog",
        description: "unbounded beliefs, costly observation of all predecessors, singletons: limit accuracy F_0(s*) with s* = 0.8",
        toml: concat!(
            "[signal]\nfamily = \"linear_symmetric\"\n",
            "[payoff]\nform = \"linear\"\nbase = 0.1\nmatch_bonus = 1\nbeta = 0.25\n",
            "[observation]\nscheme = \"endogenous\"\ncost = 0.1\ncapacity = \"t-1\"\n",
            "[strategy]\nkind = \"endogenous_cutoff\"\n",
            "[simulation]\nhorizon = 300\nreplications = 100000\nseed = 1\nsize = 1\n",
        ),
    },
    Preset {
        name: "thm3_endog_unbounded",
        description: "unbounded beliefs, costly observation, delegates watch the previous delegate, truth-seeking on path",
        toml: concat!(
            "[signal]\nfamily = \"linear_symmetric\"\n",
            "[payoff]\nform = \"linear\"\nbase = 0.1\nmatch_bonus = 1\nbeta = 0.25\n",
            "[observation]\nscheme = \"endogenous\"\ncost = 0.1\ncapacity = \"t-1\"\n",
            "[strategy]\nkind = \"delegate\"\nprescription = \"predecessor\"\non_path = \"truth_seeking\"\n",
            "[simulation]\nhorizon = 300\nreplications = 10000\nseed = 1\nsize = 5\n",
        ),
    },
    Preset {
        name: "thm4_endog_bounded",
        description: "bounded beliefs, costly observation, delegates watch all predecessors, epsilon-cutoff on path (epsilon 0.05)",
        toml: concat!(
            "[signal]\nfamily = \"bounded_mixture\"\nlambda = 0.5\n",
            "[payoff]\nform = \"linear\"\nbase = 0.1\nmatch_bonus = 1\nbeta = 0.25\n",
            "[observation]\nscheme = \"endogenous\"\ncost = 0.1\ncapacity = \"t-1\"\n",
            "[strategy]\nkind = \"delegate\"\nprescription = \"recent_k\"\non_path = \"cutoff\"\nepsilon = 0.05\n",
            "[simulation]\nhorizon = 500\nreplications = 10000\nseed = 1\nsize = 5\n",
        ),
    },
    Preset {
        name: "prop4_truthseek_endog",
        description: "unbounded beliefs, costly observation (cost 0.5), stakes scale with conformers: larger communities learn more",
        toml: concat!(
            "[signal]\nfamily = \"linear_symmetric\"\n",
            "[payoff]\nform = \"scaled\"\nbase = 0.1\nmatch_bonus = 1\nbeta = 0.25\n",
            "[observation]\nscheme = \"endogenous\"\ncost = 0.5\ncapacity = \"t-1\"\n",
            "[strategy]\nkind = \"endogenous_cutoff\"\n",
            "[simulation]\nhorizon = 300\nreplications = 20000\nseed = 1\nsize = 10\n",
        ),
    },
    Preset {
        name: "prop5_private_signals",
        description: "private signal per agent (cubic tilt), line network, communities of 20, symmetric cutoff profile: herds on confident observations",
        toml: concat!(
            "[signal]\nfamily = \"power_tilt\"\nexponent = 3\n",
            "[payoff]\nform = \"linear\"\nbase = 0.1\nmatch_bonus = 1\nbeta = 0.25\n",
            "[observation]\nscheme = \"line\"\n",
            "[strategy]\nkind = \"private_signal\"\niterations = 200\n",
            "[simulation]\nhorizon = 500\nreplications = 10000\nseed = 1\nsize = 20\n",
        ),
    },
    Preset {
        name: "prop6_separation",
        description: "separation payoffs (kappa 2), complete network, communities of 4: members split and the majority follows the belief",
        toml: concat!(
            "[signal]\nfamily = \"linear_symmetric\"\n",
            "[payoff]\nform = \"inverse_crowd\"\nmode = \"separation\"\nmatch_bonus = 1\nkappa = 2\n",
            "[observation]\nscheme = \"complete\"\n",
            "[strategy]\nkind = \"separation_split\"\n",
            "[simulation]\nhorizon = 200\nreplications = 10000\nseed = 1\nsize = 4\n",
        ),
    },
];

pub fn all() -> &'static [Preset] {
    &PRESETS
}

pub fn find(name: &str) -> Option<&'static Preset> {
    PRESETS.iter().find(|p| p.name == name)
}

/// A header line, then one aligned `name  description` line per preset.
pub fn table() -> String {
    let width = PRESETS.iter().map(|p| p.name.len()).max().unwrap_or(0);
    let mut out = format!("{:<width$}  description\n", "name");
    for p in &PRESETS {
        out.push_str(&format!("{:<width$}  {}\n", p.name, p.description));
    }
    out
}
