// Drag-to-apply-force: while the pointer is down on a selected grip, a
// virtual spring from the grip to the cursor produces the wrench command
// (stiffness 200 N/m, clamped to the safety bound). Releasing the pointer
// commands zero.

import { Command, Vec3, clampWrench, wrenchCommand } from "./protocol.js";

export const HAND_STIFFNESS = 200.0; // N/m

export interface DragState {
  grip: string | null;
  active: boolean;
  cursor: [number, number]; // world coords, m
}

export function startDrag(state: DragState, grip: string | null, cursor: [number, number]): DragState {
  if (!grip) return { ...state, active: false };
  return { grip, active: true, cursor };
}

export function moveDrag(state: DragState, cursor: [number, number]): DragState {
  return state.active ? { ...state, cursor } : state;
}

export function endDrag(state: DragState): DragState {
  return { ...state, active: false };
}

/**
 * Wrench command for the current pointer state, or null when idle.
 * gripPos is the grip's current world position from the latest frame.
 */
export function dragWrench(state: DragState, gripPos: [number, number] | null): Command | null {
  if (!state.grip) return null;
  if (!state.active) {
    return wrenchCommand(state.grip, [0, 0, 0]);
  }
  if (!gripPos) return null;
  const fx = HAND_STIFFNESS * (state.cursor[0] - gripPos[0]);
  const fy = HAND_STIFFNESS * (state.cursor[1] - gripPos[1]);
  return wrenchCommand(state.grip, [fx, fy, 0]);
}

/** Pure spring law, exposed for the HUD readout. */
export function springForce(cursor: [number, number], grip: [number, number]): Vec3 {
  const raw: Vec3 = [
    HAND_STIFFNESS * (cursor[0] - grip[0]),
    HAND_STIFFNESS * (cursor[1] - grip[1]),
    0,
  ];
  return clampWrench(raw, [0, 0, 0]).force;
}
