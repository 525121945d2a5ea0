#!/usr/bin/env python3
"""Writes the bundled OpenDRIVE fixtures (highway, ramp, intersection,
roundabout, long_route) into maps/.

Junction connectors are built from the lane-center path (line or biarc) and
then shifted half a lane to the left, since lane -1 sits right of the road
reference line.
"""
import argparse
import math
import os
import xml.etree.ElementTree as ET

W = 3.5


def fmt(v):
    return repr(float(v))


def seg_end(x, y, h, length, k):
    if abs(k) < 1e-12:
        return x + length * math.cos(h), y + length * math.sin(h), h
    h1 = h + k * length
    return x + (math.sin(h1) - math.sin(h)) / k, y - (math.cos(h1) - math.cos(h)) / k, h1


def chain(x, y, h, pieces):
    """pieces: [(length, curvature)] -> [(x, y, h, length, k)]"""
    out = []
    for length, k in pieces:
        out.append((x, y, h, length, k))
        x, y, h = seg_end(x, y, h, length, k)
    return out


def arc_to(p, t, q):
    # arc leaving p with unit tangent t and passing through q
    c = (q[0] - p[0], q[1] - p[1])
    cross = t[0] * c[1] - t[1] * c[0]
    dot = t[0] * c[0] + t[1] * c[1]
    n2 = c[0] ** 2 + c[1] ** 2
    k = 2.0 * cross / n2
    if abs(k) < 1e-12:
        return math.sqrt(n2), 0.0
    theta = 2.0 * math.atan2(cross, dot)
    return theta / k, k


def biarc(x0, y0, h0, x1, y1, h1):
    t0 = (math.cos(h0), math.sin(h0))
    t1 = (math.cos(h1), math.sin(h1))
    v = (x1 - x0, y1 - y0)
    vt = v[0] * (t0[0] + t1[0]) + v[1] * (t0[1] + t1[1])
    vv = v[0] ** 2 + v[1] ** 2
    tt = t0[0] * t1[0] + t0[1] * t1[1]
    if abs(1.0 - tt) < 1e-12:
        vt1 = v[0] * t1[0] + v[1] * t1[1]
        if abs(vt1) < 1e-12:
            raise ValueError("degenerate biarc")
        d = vv / (4.0 * vt1)
    else:
        d = (-vt + math.sqrt(vt * vt + 2.0 * (1.0 - tt) * vv)) / (2.0 * (1.0 - tt))
    m = ((x0 + d * t0[0] + x1 - d * t1[0]) / 2.0, (y0 + d * t0[1] + y1 - d * t1[1]) / 2.0)
    a = arc_to((x0, y0), t0, m)
    # second arc computed backwards from the end
    b_len, b_k = arc_to((x1, y1), (-t1[0], -t1[1]), m)
    pieces = [p for p in (a, (b_len, -b_k)) if p[0] > 1e-9]
    return pieces


def lane_path_to_reference(x, y, h, pieces, w=W):
    """Lane -1 follows `pieces`; returns the reference geometry (shifted left)."""
    segs = []
    for px, py, ph, length, k in chain(x, y, h, pieces):
        rx = px - 0.5 * w * math.sin(ph)
        ry = py + 0.5 * w * math.cos(ph)
        kr = k / (1.0 - k * 0.5 * w)
        lr = length / (1.0 + kr * 0.5 * w)
        segs.append((rx, ry, ph, lr, kr))
    return segs


class Doc:
    def __init__(self, name):
        self.root = ET.Element("OpenDRIVE")
        ET.SubElement(self.root, "header", revMajor="1", revMinor="6", name=name)
        self.junctions = {}

    def road(self, rid, geometry, right=1, left=0, junction="-1", pred=None, succ=None, speed=None,
             lane_links=None):
        """geometry: [(x, y, h, length, k)]; lane_links: {lane: (pred_lane, succ_lane)}"""
        total = sum(g[3] for g in geometry)
        r = ET.SubElement(self.root, "road", id=rid, length=fmt(total), junction=junction)
        link = ET.SubElement(r, "link")
        if pred:
            ET.SubElement(link, "predecessor", elementType=pred[0], elementId=pred[1])
        if succ:
            ET.SubElement(link, "successor", elementType=succ[0], elementId=succ[1])
        if speed:
            t = ET.SubElement(r, "type", s="0", type="town")
            ET.SubElement(t, "speed", max=fmt(speed), unit="m/s")
        pv = ET.SubElement(r, "planView")
        s = 0.0
        for x, y, h, length, k in geometry:
            g = ET.SubElement(pv, "geometry", s=fmt(s), x=fmt(x), y=fmt(y), hdg=fmt(h), length=fmt(length))
            if abs(k) < 1e-15:
                ET.SubElement(g, "line")
            else:
                ET.SubElement(g, "arc", curvature=fmt(k))
            s += length
        lanes = ET.SubElement(r, "lanes")
        sec = ET.SubElement(lanes, "laneSection", s="0")
        lane_links = lane_links or {}

        def add(group, lid):
            ln = ET.SubElement(group, "lane", id=str(lid), type="driving", level="false")
            pl = lane_links.get(lid)
            if pl:
                lk = ET.SubElement(ln, "link")
                if pl[0] is not None:
                    ET.SubElement(lk, "predecessor", id=str(pl[0]))
                if pl[1] is not None:
                    ET.SubElement(lk, "successor", id=str(pl[1]))
            ET.SubElement(ln, "width", sOffset="0", a=fmt(W), b="0", c="0", d="0")

        if left:
            g = ET.SubElement(sec, "left")
            for lid in range(left, 0, -1):
                add(g, lid)
        c = ET.SubElement(sec, "center")
        ET.SubElement(c, "lane", id="0", type="none", level="false")
        if right:
            g = ET.SubElement(sec, "right")
            for lid in range(-1, -right - 1, -1):
                add(g, lid)
        return total

    def connection(self, jid, incoming, connecting, lane_from, lane_to=-1):
        j = self.junctions.get(jid)
        if j is None:
            j = ET.SubElement(self.root, "junction", id=jid, name=jid)
            self.junctions[jid] = j
        cid = str(len(j.findall("connection")))
        c = ET.SubElement(j, "connection", id=cid, incomingRoad=incoming, connectingRoad=connecting,
                          contactPoint="start")
        ET.SubElement(c, "laneLink", **{"from": str(lane_from), "to": str(lane_to)})

    def write(self, path):
        ET.indent(self.root, space="  ")
        ET.ElementTree(self.root).write(path, encoding="utf-8", xml_declaration=True)


def straight_links(n):
    return {-i: (-i, -i) for i in range(1, n + 1)}


def highway():
    d = Doc("highway")
    n = 3
    g1 = chain(0.0, 0.0, 0.0, [(400.0, 0.0)])
    x, y, h = seg_end(*g1[-1][:3], 400.0, 0.0)
    g2 = chain(x, y, h, [(200.0, 1.0 / 400.0)])
    x, y, h = seg_end(*g2[-1][:3], 200.0, 1.0 / 400.0)
    g3 = chain(x, y, h, [(400.0, 0.0)])
    d.road("1", g1, right=n, succ=("road", "2"), speed=25.0, lane_links=straight_links(n))
    d.road("2", g2, right=n, pred=("road", "1"), succ=("road", "3"), speed=25.0, lane_links=straight_links(n))
    d.road("3", g3, right=n, pred=("road", "2"), speed=25.0, lane_links=straight_links(n))
    return d


def ramp():
    d = Doc("ramp")
    d.road("1", chain(0.0, 0.0, 0.0, [(300.0, 0.0)]), right=2, succ=("junction", "m"), speed=22.0,
           lane_links=straight_links(2))
    d.road("2", chain(0.0, -12.0, 0.0, [(300.0, 0.0)]), right=1, succ=("junction", "m"), speed=16.0,
           lane_links={-1: (None, -1)})
    d.road("3", chain(360.0, 0.0, 0.0, [(500.0, 0.0)]), right=2, pred=("junction", "m"), speed=22.0,
           lane_links=straight_links(2))
    # main connectors
    for lid, cid in ((-1, "10"), (-2, "11")):
        yc = -(abs(lid) - 0.5) * W
        ref = lane_path_to_reference(300.0, yc, 0.0, [(60.0, 0.0)])
        d.road(cid, ref, right=1, junction="m", pred=("road", "1"), succ=("road", "3"),
               lane_links={-1: (lid, lid)})
        d.connection("m", "1", cid, lid)
    # ramp merges into the right lane
    pieces = biarc(300.0, -12.0 - 0.5 * W, 0.0, 360.0, -1.5 * W, 0.0)
    d.road("12", lane_path_to_reference(300.0, -12.0 - 0.5 * W, 0.0, pieces), right=1, junction="m",
           pred=("road", "2"), succ=("road", "3"), lane_links={-1: (-1, -2)})
    d.connection("m", "2", "12", -1)
    return d


def rot(x, y, a):
    c, s = math.cos(a), math.sin(a)
    return c * x - s * y, s * x + c * y


def intersection():
    d = Doc("intersection")
    arms = {"e": 0.0, "n": math.pi / 2, "w": math.pi, "s": 3 * math.pi / 2}
    r0, length = 12.0, 150.0
    for name, a in arms.items():
        x, y = rot(r0, 0.0, a)
        d.road(name, chain(x, y, a, [(length, 0.0)]), right=1, left=1, pred=("junction", "j"), speed=12.0,
               lane_links={-1: (None, None), 1: (None, None)})
    order = ["e", "n", "w", "s"]
    for src in order:
        a_in = arms[src]
        xin, yin = rot(r0, 0.5 * W, a_in)
        hin = a_in + math.pi
        for dst in order:
            if dst == src:
                continue
            a_out = arms[dst]
            xout, yout = rot(r0, -0.5 * W, a_out)
            pieces = biarc(xin, yin, hin, xout, yout, a_out)
            cid = f"{src}{dst}"
            d.road(cid, lane_path_to_reference(xin, yin, hin, pieces), right=1, junction="j",
                   pred=("road", src), succ=("road", dst), lane_links={-1: (1, -1)})
            d.connection("j", src, cid, 1)
    return d


def roundabout():
    d = Doc("roundabout")
    R = 30.0
    span = math.radians(20.0)
    r_arm, length = 48.0, 150.0
    angles = [0.0, math.pi / 2, math.pi, 3 * math.pi / 2]
    names = ["a", "b", "c", "d"]

    def ring_point(t):
        return R * math.cos(t), R * math.sin(t), t + math.pi / 2

    for i, (name, a) in enumerate(zip(names, angles)):
        jid = "j" + name
        x, y = rot(r_arm, 0.0, a)
        d.road(name, chain(x, y, a, [(length, 0.0)]), right=1, left=1, pred=("junction", jid), speed=12.0,
               lane_links={-1: (None, None), 1: (None, None)})
        # ring road from this junction to the next one
        nxt = names[(i + 1) % 4]
        x0, y0, h0 = ring_point(a + span)
        pieces = [((math.pi / 2 - 2 * span) * R, 1.0 / R)]
        d.road("r" + name, lane_path_to_reference(x0, y0, h0, pieces), right=1, pred=("junction", jid),
               succ=("junction", "j" + nxt), speed=10.0, lane_links={-1: (None, None)})
    for i, (name, a) in enumerate(zip(names, angles)):
        jid = "j" + name
        prev = names[(i - 1) % 4]
        xr0, yr0, hr0 = ring_point(a - span)
        xr1, yr1, hr1 = ring_point(a + span)
        # through the junction on the ring
        cid = "t" + name
        d.road(cid, lane_path_to_reference(xr0, yr0, hr0, [(2 * span * R, 1.0 / R)]), right=1, junction=jid,
               pred=("road", "r" + prev), succ=("road", "r" + name), speed=10.0, lane_links={-1: (-1, -1)})
        d.connection(jid, "r" + prev, cid, -1)
        # entry
        xin, yin = rot(r_arm, 0.5 * W, a)
        hin = a + math.pi
        cid = "i" + name
        d.road(cid, lane_path_to_reference(xin, yin, hin, biarc(xin, yin, hin, xr1, yr1, hr1)), right=1,
               junction=jid, pred=("road", name), succ=("road", "r" + name), speed=10.0, lane_links={-1: (1, -1)})
        d.connection(jid, name, cid, 1)
        # exit
        xout, yout = rot(r_arm, -0.5 * W, a)
        cid = "o" + name
        d.road(cid, lane_path_to_reference(xr0, yr0, hr0, biarc(xr0, yr0, hr0, xout, yout, a)), right=1,
               junction=jid, pred=("road", "r" + prev), succ=("road", name), speed=10.0, lane_links={-1: (-1, -1)})
        d.connection(jid, "r" + prev, cid, -1)
    return d


def long_route():
    d = Doc("long_route")
    n = 3
    pieces = [(600.0, 0.0), (300.0, 1.0 / 600.0), (600.0, 0.0), (300.0, -1.0 / 600.0), (600.0, 0.0),
              (300.0, 1.0 / 800.0), (600.0, 0.0)]
    x, y, h = 0.0, 0.0, 0.0
    ids = [str(i + 1) for i in range(len(pieces))]
    for i, (length, k) in enumerate(pieces):
        pred = ("road", ids[i - 1]) if i > 0 else None
        succ = ("road", ids[i + 1]) if i + 1 < len(ids) else None
        d.road(ids[i], [(x, y, h, length, k)], right=n, pred=pred, succ=succ, speed=25.0,
               lane_links=straight_links(n))
        x, y, h = seg_end(x, y, h, length, k)
    return d


MAPS = {"highway": highway, "ramp": ramp, "intersection": intersection, "roundabout": roundabout,
        "long_route": long_route}


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--out", default=os.path.join(os.path.dirname(__file__), "..", "maps"))
    args = ap.parse_args()
    os.makedirs(args.out, exist_ok=True)
    for name, build in MAPS.items():
        build().write(os.path.join(args.out, name + ".xodr"))
        print(name)


if __name__ == "__main__":
    main()
