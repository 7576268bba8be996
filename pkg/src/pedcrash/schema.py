"""Crash record schema and the per-level descriptive counts.

Seventeen explanatory variables. Binary variables are coded {0, 1}
(Yes/Male/Rural = 1), categorical variables get consecutive codes starting
at 1 in the order levels are listed below, and pedestrian
age is a real number.
"""
import hashlib
from dataclasses import dataclass, field

SEVERITY_NAMES = ("Minor injury", "Serious injury", "Fatal")
SEVERITY_SHORT = ("minor", "serious", "fatal")
N_CATEGORIES = 3
SEVERITY_COLUMN = "Severity"

BINARY = "binary"
CATEGORICAL = "categorical"
CONTINUOUS = "continuous"


@dataclass(frozen=True)
class FeatureSpec:
    name: str
    kind: str
    levels: tuple = ()  # ((level name, code), ...) in listing order
    label: str = ""

    def __post_init__(self):
        if self.kind not in (BINARY, CATEGORICAL, CONTINUOUS):
            raise ValueError(f"unknown feature kind {self.kind!r}")
        codes = [c for _, c in self.levels]
        if self.kind == CONTINUOUS and self.levels:
            raise ValueError(f"continuous feature {self.name} cannot have levels")
        if self.kind == BINARY and sorted(codes) != [0, 1]:
            raise ValueError(f"binary feature {self.name} must map to {{0, 1}}")
        if self.kind == CATEGORICAL and codes != list(range(1, len(codes) + 1)):
            raise ValueError(f"categorical feature {self.name} codes must run 1..n in order")

    @property
    def discrete(self):
        return self.kind != CONTINUOUS

    @property
    def codes(self):
        return tuple(c for _, c in self.levels)

    def code_of(self, text):
        key = text.strip().lower()
        for name, code in self.levels:
            if name.lower() == key:
                return code
        # numeric codes are accepted as well as level text
        try:
            value = float(key)
        except ValueError:
            return None
        if value.is_integer() and int(value) in self.codes:
            return int(value)
        return None

    def name_of(self, code):
        for name, c in self.levels:
            if c == int(code):
                return name
        raise KeyError(f"{self.name}: no level with code {code}")


@dataclass(frozen=True)
class FeatureSchema:
    features: tuple = field(default_factory=tuple)

    def __post_init__(self):
        names = [f.name for f in self.features]
        if len(set(names)) != len(names):
            raise ValueError("feature names must be unique")

    @property
    def names(self):
        return [f.name for f in self.features]

    def __len__(self):
        return len(self.features)

    def __iter__(self):
        return iter(self.features)

    def __getitem__(self, key):
        if isinstance(key, str):
            return self.features[self.index(key)]
        return self.features[key]

    def index(self, name):
        for i, f in enumerate(self.features):
            if f.name == name:
                return i
        raise KeyError(name)

    def discrete_codes(self):
        """Per column: sorted array-like of valid codes, or None if continuous."""
        return [f.codes if f.discrete else None for f in self.features]

    def fingerprint(self):
        text = repr([(f.name, f.kind, f.levels) for f in self.features])
        return hashlib.sha256(text.encode("utf-8")).hexdigest()


def _yes_no():
    return (("No", 0), ("Yes", 1))


def _enum(*names):
    return tuple((n, i + 1) for i, n in enumerate(names))


CRASH_SCHEMA = FeatureSchema((
    FeatureSpec("Sex", BINARY, (("Female", 0), ("Male", 1)), "Sex"),
    FeatureSpec("AgeText", CONTINUOUS, (), "Age group"),
    FeatureSpec("AlcoholDrugTest", CATEGORICAL,
                _enum("Both-Positive", "Drug-Positive", "Alcohol-Positive", "Negative", "Not related"),
                "Alcohol-drug test result"),
    FeatureSpec("DUI", BINARY, _yes_no(), "DUI"),
    FeatureSpec("DistractedDriving", BINARY, _yes_no(), "Distracted driving"),
    FeatureSpec("TeenageDriver", BINARY, _yes_no(), "Teenage driver involved"),
    FeatureSpec("Holiday", BINARY, _yes_no(), "Holiday"),
    FeatureSpec("RightTurn", BINARY, _yes_no(), "Right-turn involved"),
    FeatureSpec("Intersection", BINARY, _yes_no(), "Intersection involved"),
    FeatureSpec("LeftTurn", BINARY, _yes_no(), "Left-turn involved"),
    FeatureSpec("WorkZone", BINARY, _yes_no(), "Work zone involved"),
    FeatureSpec("RoadType", BINARY, (("Urban", 0), ("Rural", 1)), "Road type"),
    FeatureSpec("FunctionClass", CATEGORICAL, _enum("Local", "Collector", "Arterial"), "Functional class"),
    FeatureSpec("RoadwaySurf", BINARY, _yes_no(), "Roadway surface is dry"),
    FeatureSpec("Light", CATEGORICAL,
                _enum("Dark-Not lighted", "Dark-Lighted", "Daylight", "Dusk", "Dawn", "Others"),
                "Lighting condition"),
    FeatureSpec("Weather", CATEGORICAL,
                _enum("Clear", "Cloudy", "Rain", "Fog, Smog", "Snowing", "Others"),
                "Weather condition"),
    FeatureSpec("VerticalAlignment", CATEGORICAL, _enum("Level", "Uphill", "Downhill", "Others"),
                "Vertical alignment"),
))

# Age bands used when profiling and when generating ages: (label, low, high).
AGE_BANDS = (
    ("0 to 9", 0.0, 9.0),
    ("10 to 29", 10.0, 29.0),
    ("30 to 59", 30.0, 59.0),
    ("> 59", 60.0, 90.0),
)

# Descriptive counts per level as (minor, serious, fatal). Levels follow code order
# except Sex and RoadwaySurf, which list code 1 first.
CATEGORY_TOTALS = (6480, 1363, 476)
LEVEL_COUNTS = {
    "Sex": {"Male": (3775, 849, 309), "Female": (2705, 514, 167)},
    "AgeText": {
        "0 to 9": (631, 118, 33),
        "10 to 29": (3120, 556, 119),
        "30 to 59": (2131, 509, 202),
        "> 59": (598, 180, 122),
    },
    "AlcoholDrugTest": {
        "Both-Positive": (0, 0, 11),
        "Drug-Positive": (0, 0, 34),
        "Alcohol-Positive": (0, 2, 13),
        "Negative": (0, 0, 9),
        "Not related": (6480, 1361, 409),
    },
    "DUI": {"No": (6384, 1305, 413), "Yes": (96, 58, 63)},
    "DistractedDriving": {"No": (6003, 1218, 430), "Yes": (477, 145, 46)},
    "TeenageDriver": {"No": (5886, 1205, 432), "Yes": (594, 158, 44)},
    "Holiday": {"No": (5726, 1185, 397), "Yes": (754, 178, 79)},
    "RightTurn": {"No": (5025, 1254, 464), "Yes": (1455, 109, 12)},
    "Intersection": {"No": (2243, 645, 340), "Yes": (4237, 718, 136)},
    "LeftTurn": {"No": (5067, 1144, 441), "Yes": (1413, 219, 35)},
    "WorkZone": {"No": (6208, 1298, 447), "Yes": (272, 65, 29)},
    "RoadType": {"Urban": (6367, 1296, 419), "Rural": (113, 67, 57)},
    "FunctionClass": {
        "Local": (2103, 352, 71),
        "Collector": (1190, 232, 71),
        "Arterial": (3187, 779, 334),
    },
    "RoadwaySurf": {"Yes": (5585, 1181, 409), "No": (895, 182, 67)},
    "Light": {
        "Dark-Not lighted": (656, 285, 176),
        "Dark-Lighted": (1366, 332, 138),
        "Daylight": (4134, 678, 141),
        "Dusk": (174, 40, 10),
        "Dawn": (150, 28, 11),
        "Others": (74, 9, 8),
    },
    "Weather": {
        "Clear": (4955, 1068, 355),
        "Cloudy": (896, 176, 69),
        "Rain": (373, 80, 31),
        "Fog, Smog": (17, 4, 3),
        "Snowing": (165, 26, 10),
        "Others": (74, 9, 8),
    },
    "VerticalAlignment": {
        "Level": (5047, 1108, 360),
        "Uphill": (47, 7, 3),
        "Downhill": (36, 12, 2),
        "Others": (1350, 236, 111),
    },
}


def age_band(age):
    """Index into AGE_BANDS for a real-valued age."""
    if age < 10:
        return 0
    if age < 30:
        return 1
    if age < 60:
        return 2
    return 3
