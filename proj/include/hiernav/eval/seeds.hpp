#pragma once

#include <array>
#include <cstdint>
#include <span>

#include "hiernav/world.hpp"

namespace hiernav::eval {

// Frozen benchmark scene seeds. Every method is evaluated on exactly these
// scenes; do not edit.
inline constexpr std::array<std::uint64_t, 50> kEasySeeds{
    1905616561, 1614166542, 926848300,  1132046429, 1396239116, 1635800808, 1231712564, 298888934,  2091818831,
    1222445868, 1081333239, 162396134,  1092469892, 1752393289, 2042021930, 1041338575, 1130814379, 871601151,
    321240737,  726615826,  1042992684, 1346196845, 196572537,  819249800,  1588147231, 324450665,  2100455334,
    1594627807, 368025581,  590485429,  2073111432, 316380555,  1814825453, 852357541,  489820195,  1092251207,
    2009017896, 777011053,  1445723614, 972850101,  17909656,   21677279,   1993277513, 389827137,  1948072059,
    514944396,  2042083968, 122132792,  360857216,  1164949331};

inline constexpr std::array<std::uint64_t, 50> kMediumSeeds{
    1253321751, 152670617,  1688706451, 758959926,  1206102863, 172258041,  268086860,  1322779824, 798060012,
    686918800,  1237714409, 1947223594, 581413372,  1000356905, 336225122,  1701405327, 1494739285, 2067622911,
    1104601761, 636043011,  2103013412, 1274124407, 263120632,  748922442,  932576507,  331538573,  1458552508,
    1837516790, 1765390381, 2018980759, 1518675393, 1769396305, 985189518,  162738384,  1324850526, 191342223,
    1789224514, 182732360,  382014574,  816400946,  380111701,  317260242,  1595835264, 1377952146, 1014907998,
    176434634,  1659036809, 1410639119, 454539679,  565358690};

inline constexpr std::array<std::uint64_t, 50> kHardSeeds{
    713379442,  1532351008, 707225356,  1020751944, 1727750096, 2095268531, 669791015,  1554955432, 360536421,
    1616444262, 151832540,  921958243,  390596226,  1655320247, 722244519,  1941099479, 986363899,  258408944,
    1254567234, 1600412665, 941555072,  1714675499, 1220388331, 1547730282, 1864424810, 2042376321, 156124827,
    2066045649, 1667801127, 1260137810, 593654026,  466029567,  1403912717, 1016376433, 129192920,  1078869495,
    1280437475, 846079234,  1307703612, 1310827843, 2081005535, 1417592575, 2006189006, 699463426,  862901246,
    39682325,   1766916538, 1765535144, 1246781778, 1954509673};

inline std::span<const std::uint64_t> canonical_seeds(Difficulty d) {
  switch (d) {
    case Difficulty::Easy: return kEasySeeds;
    case Difficulty::Medium: return kMediumSeeds;
    case Difficulty::Hard: return kHardSeeds;
  }
  return kEasySeeds;
}

// Tracking-suite trial seeds (extrinsics per trial).
inline constexpr std::array<std::uint64_t, 20> kTrackTrialSeeds{
    9001, 9002, 9003, 9004, 9005, 9006, 9007, 9008, 9009, 9010,
    9011, 9012, 9013, 9014, 9015, 9016, 9017, 9018, 9019, 9020};

}  // namespace hiernav::eval
