"""Ready-made indoor label spaces with object part groupings."""
from __future__ import annotations

from .scene import LabelMode, LabelSpace

OFFICE_CLASSES = (
    "wall", "floor", "tableTop", "tableDrawer", "tableLeg", "chairBackRest", "chairBase",
    "chairBack", "monitor", "printerFront", "printerSide", "keyboard", "cpuTop", "cpuFront",
    "cpuSide", "book", "paper",
)
OFFICE_OBJECTS = {
    "table": ("tableTop", "tableDrawer", "tableLeg"),
    "chair": ("chairBackRest", "chairBase", "chairBack"),
    "printer": ("printerFront", "printerSide"),
    "cpu": ("cpuTop", "cpuFront", "cpuSide"),
    "wall": ("wall",), "floor": ("floor",), "monitor": ("monitor",),
    "keyboard": ("keyboard",), "book": ("book",), "paper": ("paper",),
}

HOME_CLASSES = (
    "wall", "floor", "tableTop", "tableDrawer", "tableLeg", "chairBackRest", "chairBase",
    "sofaBase", "sofaArm", "sofaBackRest", "bed", "bedSide", "quilt", "pillow", "shelfRack",
    "laptop", "book",
)
HOME_OBJECTS = {
    "table": ("tableTop", "tableDrawer", "tableLeg"),
    "chair": ("chairBackRest", "chairBase"),
    "sofa": ("sofaBase", "sofaArm", "sofaBackRest"),
    "bed": ("bed", "bedSide"),
    "wall": ("wall",), "floor": ("floor",), "quilt": ("quilt",), "pillow": ("pillow",),
    "shelfRack": ("shelfRack",), "laptop": ("laptop",), "book": ("book",),
}


def office_space(mode: LabelMode = LabelMode.EXCLUSIVE) -> LabelSpace:
    return LabelSpace.from_names(OFFICE_CLASSES, OFFICE_OBJECTS, mode)


def home_space(mode: LabelMode = LabelMode.EXCLUSIVE) -> LabelSpace:
    return LabelSpace.from_names(HOME_CLASSES, HOME_OBJECTS, mode)
