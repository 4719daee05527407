/**
 * A worker's in-progress answers for one task, keyed by annotation id and
 * group-instance index. Mirrors the server's wire format exactly:
 * {"values": {id: {"0": value}}, "group_counts": {gid: n}}.
 */

import type { AnswerValue, GroupDoc } from "./types.js";

export type WireState = {
  values: Record<string, Record<string, unknown>>;
  group_counts: Record<string, number>;
};

function isAnswered(value: unknown): boolean {
  if (value === null || value === undefined) return false;
  if (typeof value === "string") return value.length > 0;
  if (Array.isArray(value)) return value.length > 0;
  if (typeof value === "object") return Object.keys(value as object).length > 0;
  return true;
}

export class ResponseState {
  values: Map<string, Map<number, AnswerValue>>;
  groupCounts: Map<string, number>;

  constructor() {
    this.values = new Map();
    this.groupCounts = new Map();
  }

  get(aid: string, instance = 0): AnswerValue | undefined {
    return this.values.get(aid)?.get(instance);
  }

  set(aid: string, value: AnswerValue, instance = 0): void {
    let per = this.values.get(aid);
    if (!per) {
      per = new Map();
      this.values.set(aid, per);
    }
    per.set(instance, value);
  }

  delete(aid: string, instance: number): void {
    const per = this.values.get(aid);
    if (per) {
      per.delete(instance);
      if (per.size === 0) this.values.delete(aid);
    }
  }

  answered(aid: string, instance = 0): boolean {
    return isAnswered(this.get(aid, instance));
  }

  instanceCount(group: GroupDoc): number {
    return this.groupCounts.get(group.id) ?? (group.repeated ? 0 : 1);
  }

  keys(): [string, number][] {
    const out: [string, number][] = [];
    for (const [aid, per] of this.values) {
      for (const instance of per.keys()) out.push([aid, instance]);
    }
    return out;
  }

  clone(): ResponseState {
    const copy = new ResponseState();
    for (const [aid, per] of this.values) {
      copy.values.set(aid, new Map(per));
    }
    copy.groupCounts = new Map(this.groupCounts);
    return copy;
  }

  toWire(): WireState {
    const values: Record<string, Record<string, unknown>> = {};
    for (const aid of [...this.values.keys()].sort()) {
      const per = this.values.get(aid)!;
      const obj: Record<string, unknown> = {};
      for (const instance of [...per.keys()].sort((a, b) => a - b)) {
        obj[String(instance)] = per.get(instance);
      }
      values[aid] = obj;
    }
    const groupCounts: Record<string, number> = {};
    for (const gid of [...this.groupCounts.keys()].sort()) {
      groupCounts[gid] = this.groupCounts.get(gid)!;
    }
    return { values, group_counts: groupCounts };
  }

  static fromWire(doc: Partial<WireState> | undefined): ResponseState {
    const state = new ResponseState();
    if (!doc) return state;
    for (const [aid, per] of Object.entries(doc.values ?? {})) {
      for (const [idx, value] of Object.entries(per)) {
        const instance = Number(idx);
        if (!Number.isInteger(instance) || instance < 0) {
          throw new Error(`bad instance index ${idx} for ${aid}`);
        }
        state.set(aid, value as AnswerValue, instance);
      }
    }
    for (const [gid, n] of Object.entries(doc.group_counts ?? {})) {
      if (!Number.isInteger(n) || n < 0) {
        throw new Error(`group count for ${gid} must be a non-negative integer`);
      }
      state.groupCounts.set(gid, n);
    }
    return state;
  }
}

export { isAnswered };
