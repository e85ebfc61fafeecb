#!/usr/bin/env python3
"""Generate the shipped ImageNet taxonomy file from WordNet 3.0 noun data.

Usage:
    gen_taxonomy.py --wordnet-dir DIR --synsets imagenet_synsets.txt --out data/imagenet_taxonomy.json

DIR must contain the WordNet 3.0 ``data.noun`` file.  ``imagenet_synsets.txt``
lists the 1000 ImageNet-1k wnids, one per line, in class-index order (the file
shipped with timm under ``timm/data/_info``).

Each class is written with its primary hypernym chain (following the first
hypernym pointer at every step).  Super-class membership uses the full
hypernym closure; a class reachable from several super-classes of one dataset
is assigned to the one closest to it (ties broken by the dataset's listing
order).
"""

import argparse
import collections
import json

# Super-class wnids of the five robustness-package ImageNet subsets.
GROUPS = {
    "mixed_10": ["n02084071", "n01503061", "n02159955", "n02484322", "n02958343",
                 "n02120997", "n04490091", "n13134947", "n12992868", "n02858304"],
    "mixed_13": ["n02084071", "n01503061", "n02159955", "n03405725", "n02512053",
                 "n02484322", "n02958343", "n02120997", "n04490091", "n13134947",
                 "n12992868", "n02858304", "n03082979"],
    "living_9": ["n02084071", "n01503061", "n01767661", "n01661091", "n02469914",
                 "n02512053", "n02120997", "n02401031", "n01627424"],
    "big_12": ["n02084071", "n04341686", "n01503061", "n03051540", "n04576211",
               "n01661091", "n02075296", "n02159955", "n03800933", "n07555863",
               "n03405725", "n02469914"],
    "geirhos_16": ["n02686568", "n02131653", "n02834778", "n01503061", "n02858304",
                   "n02876657", "n02958343", "n02121808", "n03001627", "n03046257",
                   "n02084071", "n02503517", "n03614532", "n03623556", "n03862676",
                   "n04490091"],
}


def read_nouns(path):
    hypernyms, lemmas = {}, {}
    with open(path, encoding="utf-8") as f:
        for line in f:
            if line.startswith("  "):
                continue
            fields = line.split(" | ")[0].split()
            wnid = "n" + fields[0]
            word_count = int(fields[3], 16)
            lemmas[wnid] = fields[4]
            pos = 4 + 2 * word_count
            pointer_count = int(fields[pos])
            pos += 1
            parents = []
            for _ in range(pointer_count):
                symbol, offset, part, _ = fields[pos:pos + 4]
                pos += 4
                if symbol in ("@", "@i") and part == "n":
                    parents.append("n" + offset)
            hypernyms[wnid] = parents
    return hypernyms, lemmas


def primary_chain(wnid, hypernyms):
    chain = []
    while hypernyms[wnid]:
        wnid = hypernyms[wnid][0]
        chain.append(wnid)
    return chain


def closure_distances(wnid, hypernyms):
    dist = {wnid: 0}
    queue = collections.deque([wnid])
    while queue:
        node = queue.popleft()
        for parent in hypernyms[node]:
            if parent not in dist:
                dist[parent] = dist[node] + 1
                queue.append(parent)
    return dist


def display_name(lemma):
    return lemma.lower().replace("_", " ")


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--wordnet-dir", required=True)
    parser.add_argument("--synsets", required=True)
    parser.add_argument("--out", required=True)
    args = parser.parse_args()

    hypernyms, lemmas = read_nouns(args.wordnet_dir + "/data.noun")
    with open(args.synsets, encoding="utf-8") as f:
        wnids = [line.strip() for line in f if line.strip()]

    classes = []
    for class_id, wnid in enumerate(wnids):
        classes.append({
            "id": class_id,
            "synset": wnid,
            "lemma": lemmas[wnid],
            "hypernyms": primary_chain(wnid, hypernyms),
        })

    datasets = {}
    for name, supers in GROUPS.items():
        members = {display_name(lemmas[s]): [] for s in supers}
        for class_id, wnid in enumerate(wnids):
            dist = closure_distances(wnid, hypernyms)
            hits = [(dist[s], rank, s) for rank, s in enumerate(supers) if s in dist]
            if hits:
                members[display_name(lemmas[min(hits)[2]])].append(class_id)
        datasets[name] = members

    with open(args.out, "w", encoding="utf-8") as f:
        json.dump({"classes": classes, "datasets": datasets}, f, indent=1, sort_keys=True)
        f.write("\n")


if __name__ == "__main__":
    main()
