use std::fmt;
use std::ops::{Index, IndexMut};

use serde::de::{self, MapAccess, Visitor};
use serde::ser::SerializeMap;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// The 15 PoseTrack body joints, in annotation order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Joint {
    Nose,
    HeadBottom,
    HeadTop,
    LeftShoulder,
    RightShoulder,
    LeftElbow,
    RightElbow,
    LeftWrist,
    RightWrist,
    LeftHip,
    RightHip,
    LeftKnee,
    RightKnee,
    LeftAnkle,
    RightAnkle,
}

impl Joint {
    pub const COUNT: usize = 15;

    pub const ALL: [Joint; Joint::COUNT] = [
        Joint::Nose,
        Joint::HeadBottom,
        Joint::HeadTop,
        Joint::LeftShoulder,
        Joint::RightShoulder,
        Joint::LeftElbow,
        Joint::RightElbow,
        Joint::LeftWrist,
        Joint::RightWrist,
        Joint::LeftHip,
        Joint::RightHip,
        Joint::LeftKnee,
        Joint::RightKnee,
        Joint::LeftAnkle,
        Joint::RightAnkle,
    ];

    #[inline]
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(index: usize) -> Option<Joint> {
        Joint::ALL.get(index).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            Joint::Nose => "nose",
            Joint::HeadBottom => "head_bottom",
            Joint::HeadTop => "head_top",
            Joint::LeftShoulder => "left_shoulder",
            Joint::RightShoulder => "right_shoulder",
            Joint::LeftElbow => "left_elbow",
            Joint::RightElbow => "right_elbow",
            Joint::LeftWrist => "left_wrist",
            Joint::RightWrist => "right_wrist",
            Joint::LeftHip => "left_hip",
            Joint::RightHip => "right_hip",
            Joint::LeftKnee => "left_knee",
            Joint::RightKnee => "right_knee",
            Joint::LeftAnkle => "left_ankle",
            Joint::RightAnkle => "right_ankle",
        }
    }

    pub fn from_name(name: &str) -> Option<Joint> {
        Joint::ALL.iter().copied().find(|j| j.name() == name)
    }

    pub fn group(self) -> EvalGroup {
        joint_group(self)
    }
}

impl fmt::Display for Joint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Evaluation column a joint is reported under.
pub fn joint_group(joint: Joint) -> EvalGroup {
    use Joint::*;
    match joint {
        Nose | HeadBottom | HeadTop => EvalGroup::Head,
        LeftShoulder | RightShoulder => EvalGroup::Shou,
        LeftElbow | RightElbow => EvalGroup::Elb,
        LeftWrist | RightWrist => EvalGroup::Wri,
        LeftHip | RightHip => EvalGroup::Hip,
        LeftKnee | RightKnee => EvalGroup::Knee,
        LeftAnkle | RightAnkle => EvalGroup::Ankl,
    }
}

/// Report columns, in table order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum EvalGroup {
    Head,
    Shou,
    Elb,
    Wri,
    Hip,
    Knee,
    Ankl,
}

impl EvalGroup {
    pub const COUNT: usize = 7;

    pub const ALL: [EvalGroup; EvalGroup::COUNT] = [
        EvalGroup::Head,
        EvalGroup::Shou,
        EvalGroup::Elb,
        EvalGroup::Wri,
        EvalGroup::Hip,
        EvalGroup::Knee,
        EvalGroup::Ankl,
    ];

    #[inline]
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn label(self) -> &'static str {
        match self {
            EvalGroup::Head => "Head",
            EvalGroup::Shou => "Shou",
            EvalGroup::Elb => "Elb",
            EvalGroup::Wri => "Wri",
            EvalGroup::Hip => "Hip",
            EvalGroup::Knee => "Knee",
            EvalGroup::Ankl => "Ankl",
        }
    }

    pub fn from_label(label: &str) -> Option<EvalGroup> {
        EvalGroup::ALL.iter().copied().find(|g| g.label() == label)
    }

    pub fn joints(self) -> &'static [Joint] {
        use Joint::*;
        match self {
            EvalGroup::Head => &[Nose, HeadBottom, HeadTop],
            EvalGroup::Shou => &[LeftShoulder, RightShoulder],
            EvalGroup::Elb => &[LeftElbow, RightElbow],
            EvalGroup::Wri => &[LeftWrist, RightWrist],
            EvalGroup::Hip => &[LeftHip, RightHip],
            EvalGroup::Knee => &[LeftKnee, RightKnee],
            EvalGroup::Ankl => &[LeftAnkle, RightAnkle],
        }
    }
}

impl fmt::Display for EvalGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// One value per [`EvalGroup`], serialized as a map in column order.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct GroupValues<T>(pub [T; EvalGroup::COUNT]);

impl<T> GroupValues<T> {
    pub fn from_fn(mut f: impl FnMut(EvalGroup) -> T) -> Self {
        GroupValues(std::array::from_fn(|i| f(EvalGroup::ALL[i])))
    }

    pub fn iter(&self) -> impl Iterator<Item = (EvalGroup, &T)> {
        EvalGroup::ALL.iter().copied().zip(self.0.iter())
    }

    pub fn map<U>(&self, mut f: impl FnMut(&T) -> U) -> GroupValues<U> {
        GroupValues(std::array::from_fn(|i| f(&self.0[i])))
    }
}

impl<T> Index<EvalGroup> for GroupValues<T> {
    type Output = T;
    fn index(&self, g: EvalGroup) -> &T {
        &self.0[g.index()]
    }
}

impl<T> IndexMut<EvalGroup> for GroupValues<T> {
    fn index_mut(&mut self, g: EvalGroup) -> &mut T {
        &mut self.0[g.index()]
    }
}

impl<T: Serialize> Serialize for GroupValues<T> {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let mut map = serializer.serialize_map(Some(EvalGroup::COUNT))?;
        for (g, v) in self.iter() {
            map.serialize_entry(g.label(), v)?;
        }
        map.end()
    }
}

impl<'de, T: Deserialize<'de>> Deserialize<'de> for GroupValues<T> {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let slots = deserialize_keyed::<T, D>(deserializer, "evaluation group", EvalGroup::COUNT, |k| {
            EvalGroup::from_label(k).map(EvalGroup::index)
        })?;
        let mut out = Vec::with_capacity(EvalGroup::COUNT);
        for (i, slot) in slots.into_iter().enumerate() {
            match slot {
                Some(v) => out.push(v),
                None => return Err(de::Error::custom(format_args!("missing group `{}`", EvalGroup::ALL[i].label()))),
            }
        }
        Ok(GroupValues(vec_into_array(out)))
    }
}

/// One value per [`Joint`], serialized as a map keyed by joint name.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PerJoint<T>(pub [T; Joint::COUNT]);

impl<T> PerJoint<T> {
    pub fn from_fn(mut f: impl FnMut(Joint) -> T) -> Self {
        PerJoint(std::array::from_fn(|i| f(Joint::ALL[i])))
    }

    pub fn iter(&self) -> impl Iterator<Item = (Joint, &T)> {
        Joint::ALL.iter().copied().zip(self.0.iter())
    }
}

impl<T: Copy> PerJoint<T> {
    pub fn uniform(value: T) -> Self {
        PerJoint([value; Joint::COUNT])
    }
}

impl<T> Index<Joint> for PerJoint<T> {
    type Output = T;
    fn index(&self, j: Joint) -> &T {
        &self.0[j.index()]
    }
}

impl<T> IndexMut<Joint> for PerJoint<T> {
    fn index_mut(&mut self, j: Joint) -> &mut T {
        &mut self.0[j.index()]
    }
}

impl<T: Serialize> Serialize for PerJoint<T> {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let mut map = serializer.serialize_map(Some(Joint::COUNT))?;
        for (j, v) in self.iter() {
            map.serialize_entry(j.name(), v)?;
        }
        map.end()
    }
}

impl<'de, T: Deserialize<'de>> Deserialize<'de> for PerJoint<T> {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let slots =
            deserialize_keyed::<T, D>(deserializer, "joint", Joint::COUNT, |k| Joint::from_name(k).map(Joint::index))?;
        let mut out = Vec::with_capacity(Joint::COUNT);
        for (i, slot) in slots.into_iter().enumerate() {
            match slot {
                Some(v) => out.push(v),
                None => return Err(de::Error::custom(format_args!("missing joint `{}`", Joint::ALL[i].name()))),
            }
        }
        Ok(PerJoint(vec_into_array(out)))
    }
}

/// Reads a string-keyed map into fixed slots, rejecting unknown and duplicate keys.
pub(crate) fn deserialize_keyed<'de, T, D>(
    deserializer: D,
    what: &'static str,
    len: usize,
    slot_of: fn(&str) -> Option<usize>,
) -> Result<Vec<Option<T>>, D::Error>
where
    T: Deserialize<'de>,
    D: Deserializer<'de>,
{
    struct KeyedVisitor<T> {
        what: &'static str,
        len: usize,
        slot_of: fn(&str) -> Option<usize>,
        _marker: std::marker::PhantomData<T>,
    }

    impl<'de, T: Deserialize<'de>> Visitor<'de> for KeyedVisitor<T> {
        type Value = Vec<Option<T>>;

        fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
            write!(f, "a map keyed by {} name", self.what)
        }

        fn visit_map<A: MapAccess<'de>>(self, mut access: A) -> Result<Self::Value, A::Error> {
            let mut slots: Vec<Option<T>> = (0..self.len).map(|_| None).collect();
            while let Some(key) = access.next_key::<String>()? {
                let idx = (self.slot_of)(&key)
                    .ok_or_else(|| de::Error::custom(format_args!("unknown {} `{}`", self.what, key)))?;
                if slots[idx].is_some() {
                    return Err(de::Error::custom(format_args!("duplicate {} `{}`", self.what, key)));
                }
                slots[idx] = Some(access.next_value()?);
            }
            Ok(slots)
        }
    }

    deserializer.deserialize_map(KeyedVisitor { what, len, slot_of, _marker: std::marker::PhantomData })
}

fn vec_into_array<T, const N: usize>(v: Vec<T>) -> [T; N] {
    match v.try_into() {
        Ok(arr) => arr,
        Err(_) => unreachable!("slot count fixed by caller"),
    }
}
