/**
 * Top-down scene: floorplan, zones, objects, robots, highlights.
 *
 * buildScene turns world state into a plain node list and nothing else, so
 * tests assert on geometry without touching pixels. paintScene is the only
 * code that knows a canvas exists. A malformed snapshot throws; WorldView
 * catches that, keeps the last good scene, and surfaces a banner message.
 */

import type { ScenarioSnapshot, WorldState } from "./store.js";

export class SceneError extends Error {}

export interface SceneNode {
  kind: "room" | "zone-label" | "waypoint" | "object" | "robot" | "highlight";
  id: string;
  x: number;
  y: number;
  w?: number;
  h?: number;
  label?: string;
  role?: string;
  yaw?: number;
  aerial?: boolean;
  landmark?: boolean;
  visited?: boolean;
}

export interface Scene {
  width: number;
  height: number;
  nodes: SceneNode[];
}

export interface SceneOptions {
  zones: boolean;
}

function numbers(value: unknown, n: number): number[] {
  if (!Array.isArray(value) || value.length !== n
      || !value.every((v) => typeof v === "number" && Number.isFinite(v))) {
    throw new SceneError(`expected ${n} numbers, got ${JSON.stringify(value)}`);
  }
  return value as number[];
}

function checkScenario(raw: unknown): ScenarioSnapshot {
  if (raw === null || typeof raw !== "object") {
    throw new SceneError("scenario snapshot is not an object");
  }
  const sc = raw as ScenarioSnapshot;
  numbers(sc.size, 2);
  if (!Array.isArray(sc.rooms) || !Array.isArray(sc.zones)
      || !Array.isArray(sc.objects) || !Array.isArray(sc.robots)) {
    throw new SceneError("scenario snapshot is missing a section");
  }
  for (const room of sc.rooms) {
    if (!Array.isArray(room) || room.length !== 5
        || typeof room[0] !== "string") {
      throw new SceneError(`bad room entry ${JSON.stringify(room)}`);
    }
    numbers(room.slice(1), 4);
  }
  for (const zone of sc.zones) {
    if (!Array.isArray(zone) || zone.length !== 4
        || typeof zone[0] !== "string" || !Array.isArray(zone[3])) {
      throw new SceneError(`bad zone entry ${JSON.stringify(zone)}`);
    }
    for (const wp of zone[3]) numbers(wp, 2);
  }
  for (const obj of sc.objects) {
    if (!Array.isArray(obj) || obj.length !== 4
        || typeof obj[0] !== "string") {
      throw new SceneError(`bad object entry ${JSON.stringify(obj)}`);
    }
    if (obj[2] !== null) numbers(obj[2], 3);
  }
  for (const robot of sc.robots) {
    if (!Array.isArray(robot) || robot.length !== 4
        || typeof robot[0] !== "string") {
      throw new SceneError(`bad robot entry ${JSON.stringify(robot)}`);
    }
    numbers(robot[3], 3);
  }
  return sc;
}

export function buildScene(world: WorldState, opts: SceneOptions): Scene {
  if (world.rawScenario === null) {
    return { width: 0, height: 0, nodes: [] };
  }
  const sc = checkScenario(world.rawScenario);
  const nodes: SceneNode[] = [];

  for (const [name, x0, z0, x1, z1] of sc.rooms) {
    nodes.push({
      kind: "room", id: name, label: name,
      x: x0, y: z0, w: x1 - x0, h: z1 - z0,
    });
  }

  if (opts.zones) {
    const visited = new Set(
      world.visited.map((v) => `${v.zone}:${v.waypoint[0]},${v.waypoint[1]}`));
    for (const [name, , aerial, waypoints] of sc.zones) {
      let i = 0;
      for (const [x, y] of waypoints) {
        nodes.push({
          kind: "waypoint", id: `${name}:${i}`, x, y, aerial,
          visited: visited.has(`${name}:${x},${y}`),
        });
        i += 1;
      }
      const first = waypoints[0];
      if (first) {
        nodes.push({
          kind: "zone-label", id: name, label: name,
          x: first[0], y: first[1], aerial,
        });
      }
    }
  }

  for (const [id, concept, pos, landmark] of sc.objects) {
    if (pos === null) continue; // carried parts have no independent place
    nodes.push({
      kind: "object", id, label: concept, x: pos[0], y: pos[2], landmark,
    });
    if (world.found.has(id)) {
      nodes.push({ kind: "highlight", id, x: pos[0], y: pos[2] });
    }
  }

  for (const [name, , role, station] of sc.robots) {
    const pose = world.poses.get(name);
    const x = pose ? pose.pos[0] : station[0];
    const y = pose ? pose.pos[2] : station[2];
    nodes.push({
      kind: "robot", id: name, label: name, role, x, y,
      yaw: pose ? pose.yaw : 0,
    });
  }

  return { width: sc.size[0], height: sc.size[1], nodes };
}

/** Holds the last good scene so a bad snapshot never blanks the view. */
export class WorldView {
  scene: Scene = { width: 0, height: 0, nodes: [] };
  error: string | null = null;

  update(world: WorldState, opts: SceneOptions): Scene {
    try {
      this.scene = buildScene(world, opts);
      this.error = null;
    } catch (err) {
      if (!(err instanceof SceneError)) throw err;
      this.error = err.message;
    }
    return this.scene;
  }
}

/** Minimal 2D context surface used by the painter; tests pass a recorder. */
export interface Painter {
  fillStyle: string;
  strokeStyle: string;
  lineWidth: number;
  font: string;
  clearRect(x: number, y: number, w: number, h: number): void;
  fillRect(x: number, y: number, w: number, h: number): void;
  strokeRect(x: number, y: number, w: number, h: number): void;
  beginPath(): void;
  arc(x: number, y: number, r: number, a0: number, a1: number): void;
  fill(): void;
  stroke(): void;
  fillText(text: string, x: number, y: number): void;
}

const COLORS = {
  floor: "#f7f5ef",
  wall: "#6b6257",
  waypoint: "#b7c9e2",
  visited: "#5b87c5",
  object: "#8a7352",
  robot: "#2c8a43",
  highlight: "#d8a400",
  label: "#3d3a35",
};

export function paintScene(ctx: Painter, scene: Scene, scale: number): void {
  ctx.clearRect(0, 0, scene.width * scale, scene.height * scale);
  for (const node of scene.nodes) {
    const x = node.x * scale;
    const y = node.y * scale;
    switch (node.kind) {
      case "room":
        ctx.fillStyle = COLORS.floor;
        ctx.fillRect(x, y, (node.w ?? 0) * scale, (node.h ?? 0) * scale);
        ctx.strokeStyle = COLORS.wall;
        ctx.lineWidth = 2;
        ctx.strokeRect(x, y, (node.w ?? 0) * scale, (node.h ?? 0) * scale);
        ctx.fillStyle = COLORS.label;
        ctx.font = "12px sans-serif";
        ctx.fillText(node.label ?? node.id, x + 6, y + 16);
        break;
      case "waypoint":
        ctx.fillStyle = node.visited ? COLORS.visited : COLORS.waypoint;
        ctx.beginPath();
        ctx.arc(x, y, 4, 0, Math.PI * 2);
        ctx.fill();
        break;
      case "zone-label":
        ctx.fillStyle = COLORS.visited;
        ctx.font = "10px sans-serif";
        ctx.fillText(node.label ?? node.id, x + 8, y - 8);
        break;
      case "object":
        // search targets share the robots' green; furniture stays muted
        ctx.fillStyle = node.landmark ? COLORS.object : COLORS.robot;
        ctx.fillRect(x - 4, y - 4, 8, 8);
        if (node.landmark) {
          ctx.fillStyle = COLORS.label;
          ctx.font = "10px sans-serif";
          ctx.fillText(node.label ?? node.id, x + 6, y + 4);
        }
        break;
      case "robot":
        ctx.fillStyle = COLORS.robot;
        ctx.fillRect(x - 7, y - 7, 14, 14);
        ctx.fillStyle = COLORS.label;
        ctx.font = "11px sans-serif";
        ctx.fillText(node.label ?? node.id, x + 10, y + 4);
        break;
      case "highlight":
        ctx.strokeStyle = COLORS.highlight;
        ctx.lineWidth = 3;
        ctx.beginPath();
        ctx.arc(x, y, 11, 0, Math.PI * 2);
        ctx.stroke();
        break;
    }
  }
}
