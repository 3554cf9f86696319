"""Rank a fifteen-scene count table by each key and print the orderings."""
from oculo.scenes import RankKey, SceneStats, rank_scenes

# scene, fixations, saccades, unclassified
SWISS_SCENES = [
    ("Эгль", 856, 42, 0),
    ("Аванш", 862, 50, 1),
    ("Шато-д'О", 785, 22, 0),
    ("Жура Водуа (Шассерон)", 560, 36, 0),
    ("Лозанна (Собор)", 1435, 70, 1),
    ("Лозанна (Уши)", 1462, 56, 0),
    ("Лаво-ЮНЕСКО", 1187, 50, 0),
    ("Ле Дьяблере (Ледник 3000)", 2105, 154, 3),
    ("Лейзин (Куклос)", 1125, 52, 5),
    ("Монтре (Шильонский замок)", 508, 28, 0),
    ("Монтрё (Рош-де-Нэ)", 1776, 106, 1),
    ("Морж", 760, 48, 0),
    ("Ньон", 609, 57, 0),
    ("Вали де Жу", 689, 46, 0),
    ("Ивердон-ле-Бен", 496, 41, 0),
]


def main():
    stats = [SceneStats(name, fix, sac, unc) for name, fix, sac, unc in SWISS_SCENES]
    by_name = {s.scene_name: s for s in stats}
    for key in (RankKey.FIXATION_COUNT, RankKey.SACCADE_COUNT):
        print(f"# ranked by {key.value}")
        for rank, name in enumerate(rank_scenes(stats, key), 1):
            s = by_name[name]
            print(f"{rank:2d}  {s.fixation_count:5d}  {s.saccade_count:4d}  {name}")
        print()


if __name__ == "__main__":
    main()
