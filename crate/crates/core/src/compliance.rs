//! Legal checks for renewable (REC) and citizen (CEC) energy communities:
//! proximity of the members to the community's generation assets and the
//! membership and control rules.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{GeoPoint, Member, MemberCategory};

pub const EARTH_RADIUS_KM: f64 = 6371.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum CommunityType {
    #[serde(rename = "REC")]
    Rec,
    #[serde(rename = "CEC")]
    Cec,
}

impl fmt::Display for CommunityType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CommunityType::Rec => "REC",
            CommunityType::Cec => "CEC",
        })
    }
}

impl std::str::FromStr for CommunityType {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "REC" => Ok(CommunityType::Rec),
            "CEC" => Ok(CommunityType::Cec),
            _ => Err(Error::Invalid(format!("unknown community type '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Warning,
    Violation,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub struct Finding {
    pub rule: String,
    pub severity: Severity,
    pub message: String,
    pub members: Vec<String>,
}

impl Finding {
    fn new(rule: &str, severity: Severity, message: String, mut members: Vec<String>) -> Self {
        members.sort();
        Self { rule: rule.to_string(), severity, message, members }
    }
}

impl fmt::Display for Finding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{:?}] {}: {}", self.severity, self.rule, self.message)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComplianceVerdict {
    pub community_type: CommunityType,
    pub passed: bool,
    pub findings: Vec<Finding>,
}

impl ComplianceVerdict {
    pub fn new(community_type: CommunityType, mut findings: Vec<Finding>) -> Self {
        findings.sort();
        let passed = !findings.iter().any(|f| f.severity == Severity::Violation);
        Self { community_type, passed, findings }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeKind {
    /// Above the MV/LV level; does not count as a common transformer.
    Substation,
    /// MV/LV transformer.
    Transformer,
    ConnectionPoint,
}

impl std::str::FromStr for NodeKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "substation" => Ok(NodeKind::Substation),
            "transformer" => Ok(NodeKind::Transformer),
            "connection_point" | "connection" => Ok(NodeKind::ConnectionPoint),
            _ => Err(Error::FeederGraph(format!("unknown node kind '{s}'"))),
        }
    }
}

/// A distribution feeder as a forest of parent links.
#[derive(Debug, Clone, PartialEq)]
pub struct FeederGraph {
    nodes: BTreeMap<String, (NodeKind, Option<String>)>,
}

impl FeederGraph {
    /// Builds the graph from `(child, parent, kind)` edges; roots have no
    /// parent.
    pub fn from_edges<I>(edges: I) -> Result<Self>
    where
        I: IntoIterator<Item = (String, Option<String>, NodeKind)>,
    {
        let mut nodes = BTreeMap::new();
        for (id, parent, kind) in edges {
            if nodes.insert(id.clone(), (kind, parent)).is_some() {
                return Err(Error::FeederGraph(format!("node '{id}' listed twice")));
            }
        }
        let graph = Self { nodes };
        for (id, (kind, parent)) in &graph.nodes {
            if let Some(p) = parent {
                if !graph.nodes.contains_key(p) {
                    return Err(Error::FeederGraph(format!("node '{id}' has unknown parent '{p}'")));
                }
            }
            let path = graph.path_to_root(id)?;
            if *kind == NodeKind::ConnectionPoint && !path.iter().any(|n| graph.kind(n) == Some(NodeKind::Transformer)) {
                return Err(Error::FeederGraph(format!("connection point '{id}' has no transformer above it")));
            }
        }
        Ok(graph)
    }

    pub fn kind(&self, id: &str) -> Option<NodeKind> {
        self.nodes.get(id).map(|(k, _)| *k)
    }

    pub fn contains(&self, id: &str) -> bool {
        self.nodes.contains_key(id)
    }

    fn path_to_root<'a>(&'a self, id: &'a str) -> Result<Vec<&'a str>> {
        let mut path = vec![id];
        let mut cur = id;
        while let Some((_, Some(parent))) = self.nodes.get(cur) {
            if path.len() > self.nodes.len() {
                return Err(Error::FeederGraph(format!("cycle through '{id}'")));
            }
            cur = parent;
            path.push(cur);
        }
        Ok(path)
    }

    /// MV/LV transformers on the path from `id` to its root, including `id`
    /// itself when it is one.
    pub fn transformer_ancestors(&self, id: &str) -> Result<BTreeSet<String>> {
        if !self.contains(id) {
            return Err(Error::FeederGraph(format!("unknown node '{id}'")));
        }
        Ok(self
            .path_to_root(id)?
            .into_iter()
            .filter(|n| self.kind(n) == Some(NodeKind::Transformer))
            .map(str::to_string)
            .collect())
    }

    /// Replaces transformer `b` by `a`: children of `b` are re-attached to
    /// `a` and `b` disappears.
    pub fn merge_transformers(&self, a: &str, b: &str) -> Result<Self> {
        if self.kind(a) != Some(NodeKind::Transformer) || self.kind(b) != Some(NodeKind::Transformer) {
            return Err(Error::FeederGraph(format!("'{a}' and '{b}' must both be transformers")));
        }
        let edges: Vec<_> = self
            .nodes
            .iter()
            .filter(|(id, _)| id.as_str() != b)
            .map(|(id, (kind, parent))| {
                let parent = parent.as_ref().map(|p| if p == b { a.to_string() } else { p.clone() });
                (id.clone(), parent, *kind)
            })
            .collect();
        Self::from_edges(edges)
    }
}

/// A generation asset owned by the community.
#[derive(Debug, Clone, PartialEq)]
pub struct GenerationAsset {
    pub id: String,
    pub location: Option<GeoPoint>,
    pub admin_region: Option<String>,
    pub connection_point: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ProximityMethod<'a> {
    /// Members and assets must sit below a common MV/LV transformer. An
    /// allow-list restricts which transformers qualify.
    Network {
        graph: &'a FeederGraph,
        allowed_transformers: Option<&'a [String]>,
    },
    /// Every member within `radius_km` of its nearest asset.
    Distance { radius_km: f64 },
    /// Every member in the region of some asset.
    Administrative,
}

impl ProximityMethod<'_> {
    pub fn name(&self) -> &'static str {
        match self {
            ProximityMethod::Network { .. } => "network",
            ProximityMethod::Distance { .. } => "distance",
            ProximityMethod::Administrative => "admin",
        }
    }
}

/// Great-circle distance in km (haversine, spherical Earth).
pub fn haversine_km(a: GeoPoint, b: GeoPoint) -> f64 {
    let (phi1, phi2) = (a.latitude.to_radians(), b.latitude.to_radians());
    let dphi = phi2 - phi1;
    let dlambda = (b.longitude - a.longitude).to_radians();
    let h = (dphi / 2.0).sin().powi(2) + phi1.cos() * phi2.cos() * (dlambda / 2.0).sin().powi(2);
    2.0 * EARTH_RADIUS_KM * h.sqrt().min(1.0).asin()
}

/// Members whose proximity matters: everyone holding a vote.
fn voting_members(members: &[Member]) -> impl Iterator<Item = &Member> {
    members.iter().filter(|m| m.voting_share > 0.0)
}

pub fn check_proximity(
    members: &[Member],
    assets: &[GenerationAsset],
    method: &ProximityMethod<'_>,
) -> Result<Vec<Finding>> {
    let name = method.name();
    let missing = |id: &str| Error::MissingAttribute { member: id.to_string(), method: name };
    if assets.is_empty() {
        return Ok(vec![Finding::new(
            "proximity-assets",
            Severity::Violation,
            "community has no generation asset to be close to".into(),
            vec![],
        )]);
    }
    let mut findings = Vec::new();
    match method {
        ProximityMethod::Network { graph, allowed_transformers } => {
            let ancestors = |id: &str, node: &Option<String>| -> Result<BTreeSet<String>> {
                let node = node.as_deref().ok_or_else(|| missing(id))?;
                graph.transformer_ancestors(node)
            };
            let mut common: Option<BTreeSet<String>> = allowed_transformers.map(|a| a.iter().cloned().collect());
            for asset in assets {
                let set = ancestors(&asset.id, &asset.connection_point)?;
                common = Some(match common {
                    None => set,
                    Some(c) => c.intersection(&set).cloned().collect(),
                });
            }
            let asset_common = common.unwrap_or_default();
            if asset_common.is_empty() {
                findings.push(Finding::new(
                    "proximity-network",
                    Severity::Violation,
                    "generation assets share no eligible MV/LV transformer".into(),
                    vec![],
                ));
                // Still surface missing member attributes.
                for m in voting_members(members) {
                    ancestors(&m.id, &m.connection_point)?;
                }
                return Ok(findings);
            }
            let mut all = asset_common.clone();
            let mut offenders = Vec::new();
            let mut voters = Vec::new();
            for m in voting_members(members) {
                let set = ancestors(&m.id, &m.connection_point)?;
                if set.is_disjoint(&asset_common) {
                    offenders.push(m.id.clone());
                }
                all = all.intersection(&set).cloned().collect();
                voters.push(m.id.clone());
            }
            offenders.sort();
            voters.sort();
            if !offenders.is_empty() {
                findings.push(Finding::new(
                    "proximity-network",
                    Severity::Violation,
                    format!("{} not below a transformer shared with the assets", offenders.join(", ")),
                    offenders,
                ));
            } else if all.is_empty() {
                findings.push(Finding::new(
                    "proximity-network",
                    Severity::Violation,
                    "members and assets share no single common transformer".into(),
                    voters,
                ));
            }
        }
        ProximityMethod::Distance { radius_km } => {
            let sites = assets
                .iter()
                .map(|a| a.location.ok_or_else(|| missing(&a.id)))
                .collect::<Result<Vec<_>>>()?;
            let mut offenders = Vec::new();
            let mut worst = 0.0f64;
            for m in voting_members(members) {
                let here = m.location.ok_or_else(|| missing(&m.id))?;
                let nearest = sites.iter().map(|&s| haversine_km(here, s)).fold(f64::INFINITY, f64::min);
                if nearest > *radius_km {
                    offenders.push(m.id.clone());
                    worst = worst.max(nearest);
                }
            }
            offenders.sort();
            if !offenders.is_empty() {
                findings.push(Finding::new(
                    "proximity-distance",
                    Severity::Violation,
                    format!(
                        "{} farther than {radius_km} km from every asset (up to {worst:.3} km)",
                        offenders.join(", ")
                    ),
                    offenders,
                ));
            }
        }
        ProximityMethod::Administrative => {
            let regions = assets
                .iter()
                .map(|a| a.admin_region.clone().ok_or_else(|| missing(&a.id)))
                .collect::<Result<BTreeSet<_>>>()?;
            let mut offenders = Vec::new();
            for m in voting_members(members) {
                let region = m.admin_region.as_ref().ok_or_else(|| missing(&m.id))?;
                if !regions.contains(region) {
                    offenders.push(m.id.clone());
                }
            }
            offenders.sort();
            if !offenders.is_empty() {
                findings.push(Finding::new(
                    "proximity-admin",
                    Severity::Violation,
                    format!("{} outside the administrative region of the assets", offenders.join(", ")),
                    offenders,
                ));
            }
        }
    }
    Ok(findings)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GovernanceRules {
    /// A member controls the community when its voting share exceeds this.
    pub control_threshold: f64,
    /// Single-member share above which an autonomy warning is raised.
    pub autonomy_threshold: f64,
}

impl Default for GovernanceRules {
    fn default() -> Self {
        Self { control_threshold: 0.5, autonomy_threshold: 0.5 }
    }
}

const SHARE_TOL: f64 = 1e-9;

pub fn check_governance(
    members: &[Member],
    community_type: CommunityType,
    rules: &GovernanceRules,
) -> Result<Vec<Finding>> {
    let total: f64 = members.iter().map(|m| m.voting_share).sum();
    if (total - 1.0).abs() > SHARE_TOL {
        return Err(Error::VotingShares(total));
    }
    let mut findings = Vec::new();
    let controllers: Vec<&Member> = members.iter().filter(|m| m.voting_share > rules.control_threshold).collect();

    if community_type == CommunityType::Rec {
        let ineligible: Vec<String> = members
            .iter()
            .filter(|m| {
                !matches!(
                    m.category,
                    MemberCategory::NaturalPerson | MemberCategory::Sme | MemberCategory::LocalAuthority
                )
            })
            .map(|m| m.id.clone())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        if !ineligible.is_empty() {
            findings.push(Finding::new(
                "rec-membership",
                Severity::Violation,
                format!(
                    "only natural persons, SMEs and local authorities may be members: {}",
                    ineligible.join(", ")
                ),
                ineligible,
            ));
        }
        let dominant: Vec<String> = members
            .iter()
            .filter(|m| m.voting_share > rules.autonomy_threshold)
            .map(|m| m.id.clone())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        if !dominant.is_empty() {
            findings.push(Finding::new(
                "rec-autonomy",
                Severity::Warning,
                format!("single member holds more than {} of the votes", rules.autonomy_threshold),
                dominant,
            ));
        }
    }

    let energy: Vec<String> = controllers
        .iter()
        .filter(|m| m.category == MemberCategory::EnergyCompany)
        .map(|m| m.id.clone())
        .collect();
    if !energy.is_empty() {
        findings.push(Finding::new(
            "energy-sector-control",
            Severity::Violation,
            format!("energy-sector control by {}", energy.join(", ")),
            energy,
        ));
    }
    if community_type == CommunityType::Cec {
        let large: Vec<String> = controllers
            .iter()
            .filter(|m| m.category == MemberCategory::MediumLargeEnterprise)
            .map(|m| m.id.clone())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        if !large.is_empty() {
            findings.push(Finding::new(
                "cec-enterprise-control",
                Severity::Violation,
                format!("medium or large enterprise control by {}", large.join(", ")),
                large,
            ));
        }
    }
    Ok(findings)
}

/// Runs governance and proximity checks and combines them into a verdict.
pub fn assess(
    members: &[Member],
    assets: &[GenerationAsset],
    community_type: CommunityType,
    method: &ProximityMethod<'_>,
    rules: &GovernanceRules,
) -> Result<ComplianceVerdict> {
    let mut findings = check_governance(members, community_type, rules)?;
    findings.extend(check_proximity(members, assets, method)?);
    Ok(ComplianceVerdict::new(community_type, findings))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn member(id: &str, cat: MemberCategory, share: f64, node: &str) -> Member {
        Member { connection_point: Some(node.into()), ..Member::new(id, cat, share) }
    }

    fn asset(node: &str) -> GenerationAsset {
        GenerationAsset {
            id: "pv1".into(),
            location: None,
            admin_region: None,
            connection_point: Some(node.into()),
        }
    }

    fn feeder() -> FeederGraph {
        use NodeKind::*;
        let e = |c: &str, p: Option<&str>, k| (c.to_string(), p.map(str::to_string), k);
        FeederGraph::from_edges(vec![
            e("S", None, Substation),
            e("T1", Some("S"), Transformer),
            e("T2", Some("S"), Transformer),
            e("c1", Some("T1"), ConnectionPoint),
            e("c2", Some("T1"), ConnectionPoint),
            e("c3", Some("T2"), ConnectionPoint),
            e("pv", Some("T1"), ConnectionPoint),
        ])
        .unwrap()
    }

    #[test]
    fn network_common_transformer_passes() {
        let g = feeder();
        let members = vec![
            member("a", MemberCategory::NaturalPerson, 0.5, "c1"),
            member("b", MemberCategory::NaturalPerson, 0.5, "c2"),
        ];
        let m = ProximityMethod::Network { graph: &g, allowed_transformers: None };
        assert!(check_proximity(&members, &[asset("pv")], &m).unwrap().is_empty());
    }

    #[test]
    fn network_disjoint_subtree_names_member() {
        let g = feeder();
        let members = vec![
            member("a", MemberCategory::NaturalPerson, 0.4, "c1"),
            member("b", MemberCategory::NaturalPerson, 0.6, "c3"),
        ];
        let m = ProximityMethod::Network { graph: &g, allowed_transformers: None };
        let f = check_proximity(&members, &[asset("pv")], &m).unwrap();
        assert_eq!(f.len(), 1);
        assert_eq!(f[0].severity, Severity::Violation);
        assert_eq!(f[0].members, vec!["b".to_string()]);
    }

    #[test]
    fn allow_list_restricts_perimeter() {
        let g = feeder();
        let members = vec![member("a", MemberCategory::NaturalPerson, 1.0, "c1")];
        let allowed = vec!["T2".to_string()];
        let m = ProximityMethod::Network { graph: &g, allowed_transformers: Some(&allowed) };
        let f = check_proximity(&members, &[asset("pv")], &m).unwrap();
        assert_eq!(f.len(), 1);
    }

    #[test]
    fn network_requires_connection_point() {
        let g = feeder();
        let members = vec![Member::new("a", MemberCategory::NaturalPerson, 1.0)];
        let m = ProximityMethod::Network { graph: &g, allowed_transformers: None };
        let err = check_proximity(&members, &[asset("pv")], &m).unwrap_err();
        assert!(matches!(err, Error::MissingAttribute { ref member, method: "network" } if member == "a"));
    }

    #[test]
    fn haversine_one_hundredth_degree_of_latitude() {
        let a = GeoPoint { latitude: 48.0, longitude: 2.0 };
        let b = GeoPoint { latitude: 48.01, longitude: 2.0 };
        // Along a meridian the distance is R * dphi exactly.
        let meridian = EARTH_RADIUS_KM * 0.01f64.to_radians();
        assert!((haversine_km(a, b) - meridian).abs() < 1e-9);
        assert!((haversine_km(a, b) - 1.11).abs() / 1.11 < 0.01);

        let mut members = vec![Member::new("a", MemberCategory::NaturalPerson, 1.0)];
        members[0].location = Some(a);
        let site = GenerationAsset { location: Some(b), ..asset("pv") };
        let f = check_proximity(&members, std::slice::from_ref(&site), &ProximityMethod::Distance { radius_km: 2.0 }).unwrap();
        assert!(f.is_empty());
        let f = check_proximity(&members, &[site], &ProximityMethod::Distance { radius_km: 1.0 }).unwrap();
        assert_eq!(f[0].members, vec!["a".to_string()]);
    }

    #[test]
    fn admin_regions() {
        let mut members = vec![
            Member::new("a", MemberCategory::NaturalPerson, 0.5),
            Member::new("b", MemberCategory::NaturalPerson, 0.5),
        ];
        members[0].admin_region = Some("BE-WLG".into());
        members[1].admin_region = Some("BE-WNA".into());
        let site = GenerationAsset { admin_region: Some("BE-WLG".into()), ..asset("pv") };
        let f = check_proximity(&members, &[site], &ProximityMethod::Administrative).unwrap();
        assert_eq!(f[0].members, vec!["b".to_string()]);
    }

    #[test]
    fn governance_examples() {
        let rules = GovernanceRules::default();
        let people: Vec<Member> = (0..4)
            .map(|i| Member::new(format!("p{i}"), MemberCategory::NaturalPerson, 0.25))
            .collect();
        assert!(check_governance(&people, CommunityType::Rec, &rules).unwrap().is_empty());

        let utility = vec![
            Member::new("utility", MemberCategory::EnergyCompany, 0.51),
            Member::new("p", MemberCategory::NaturalPerson, 0.49),
        ];
        for ty in [CommunityType::Rec, CommunityType::Cec] {
            let v = ComplianceVerdict::new(ty, check_governance(&utility, ty, &rules).unwrap());
            assert!(!v.passed);
            assert!(v.findings.iter().any(|f| f.message.contains("energy-sector control")));
        }

        let cec = vec![
            Member::new("corp", MemberCategory::MediumLargeEnterprise, 0.30),
            Member::new("p1", MemberCategory::NaturalPerson, 0.35),
            Member::new("p2", MemberCategory::NaturalPerson, 0.35),
        ];
        assert!(check_governance(&cec, CommunityType::Cec, &rules).unwrap().is_empty());
        let rec = check_governance(&cec, CommunityType::Rec, &rules).unwrap();
        assert_eq!(rec[0].rule, "rec-membership");
    }

    #[test]
    fn autonomy_is_only_a_warning() {
        let members = vec![
            Member::new("big", MemberCategory::NaturalPerson, 0.7),
            Member::new("small", MemberCategory::Sme, 0.3),
        ];
        let f = check_governance(&members, CommunityType::Rec, &GovernanceRules::default()).unwrap();
        let v = ComplianceVerdict::new(CommunityType::Rec, f);
        assert!(v.passed);
        assert_eq!(v.findings[0].severity, Severity::Warning);
    }

    #[test]
    fn shares_must_sum_to_one() {
        let members = vec![Member::new("a", MemberCategory::NaturalPerson, 0.6)];
        assert!(matches!(
            check_governance(&members, CommunityType::Rec, &GovernanceRules::default()),
            Err(Error::VotingShares(_))
        ));
    }

    #[test]
    fn feeder_rejects_bad_graphs() {
        use NodeKind::*;
        let e = |c: &str, p: Option<&str>, k| (c.to_string(), p.map(str::to_string), k);
        assert!(FeederGraph::from_edges(vec![e("c", Some("T"), ConnectionPoint)]).is_err());
        assert!(FeederGraph::from_edges(vec![e("c", None, ConnectionPoint)]).is_err());
        assert!(FeederGraph::from_edges(vec![e("a", Some("b"), Transformer), e("b", Some("a"), Transformer)]).is_err());
    }

    fn categories() -> impl Strategy<Value = MemberCategory> {
        prop::sample::select(MemberCategory::ALL.to_vec())
    }

    proptest! {
        #[test]
        fn verdict_is_permutation_invariant(
            cats in prop::collection::vec(categories(), 1..6),
            raw in prop::collection::vec(0.01f64..1.0, 6),
            nodes in prop::collection::vec(prop::sample::select(vec!["c1", "c2", "c3"]), 6),
            seed in any::<u64>(),
            cec in any::<bool>(),
        ) {
            let n = cats.len();
            let total: f64 = raw[..n].iter().sum();
            let mut members: Vec<Member> = (0..n)
                .map(|i| member(&format!("m{i}"), cats[i], raw[i] / total, nodes[i]))
                .collect();
            let fix: f64 = members.iter().map(|m| m.voting_share).sum();
            members[0].voting_share += 1.0 - fix;
            let g = feeder();
            let ty = if cec { CommunityType::Cec } else { CommunityType::Rec };
            let m = ProximityMethod::Network { graph: &g, allowed_transformers: None };
            let a = assess(&members, &[asset("pv")], ty, &m, &GovernanceRules::default()).unwrap();
            let k = (seed as usize) % n;
            members.rotate_left(k);
            members.reverse();
            let b = assess(&members, &[asset("pv")], ty, &m, &GovernanceRules::default()).unwrap();
            prop_assert_eq!(a, b);
        }

        #[test]
        fn merging_sibling_transformers_keeps_a_pass(
            nodes in prop::collection::vec(prop::sample::select(vec!["c1", "c2", "c3"]), 1..5),
        ) {
            let g = feeder();
            let n = nodes.len();
            let members: Vec<Member> = nodes
                .iter()
                .enumerate()
                .map(|(i, node)| member(&format!("m{i}"), MemberCategory::NaturalPerson, 1.0 / n as f64, node))
                .collect();
            let before = check_proximity(&members, &[asset("pv")], &ProximityMethod::Network { graph: &g, allowed_transformers: None }).unwrap();
            let merged = g.merge_transformers("T1", "T2").unwrap();
            let after = check_proximity(&members, &[asset("pv")], &ProximityMethod::Network { graph: &merged, allowed_transformers: None }).unwrap();
            if before.is_empty() {
                prop_assert!(after.is_empty());
            }
            // All connection points end up under T1 after the merge.
            prop_assert!(after.is_empty());
        }

        #[test]
        fn distance_symmetric_and_wraps(
            lat1 in -80.0f64..80.0, lon1 in -180.0f64..180.0,
            lat2 in -80.0f64..80.0, lon2 in -180.0f64..180.0,
        ) {
            let a = GeoPoint { latitude: lat1, longitude: lon1 };
            let b = GeoPoint { latitude: lat2, longitude: lon2 };
            let d = haversine_km(a, b);
            prop_assert!((d - haversine_km(b, a)).abs() < 1e-9);
            let wrapped = GeoPoint { latitude: lat2, longitude: lon2 + 360.0 };
            prop_assert!((d - haversine_km(a, wrapped)).abs() < 1e-6);
        }
    }
}
