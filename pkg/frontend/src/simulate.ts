/**
 * Scripted typing sessions for cross-component conformance checks: writes N
 * canonical blobs produced through the same session/export path the page
 * uses, so the primary ingester can be pointed at real recorder output.
 *
 * Usage: node dist/simulate.js <outDir> [count] [seed]
 */

import { mkdirSync, writeFileSync } from 'node:fs'
import { join, resolve } from 'node:path'
import { fileURLToPath } from 'node:url'

import { CaptureSession, exportSession } from './session.js'

/** Deterministic 32-bit PRNG so simulations replay exactly. */
function mulberry32(seed: number): () => number {
  let a = seed >>> 0
  return () => {
    a = (a + 0x6d2b79f5) | 0
    let t = Math.imul(a ^ (a >>> 15), 1 | a)
    t = (t + Math.imul(t ^ (t >>> 7), 61 | t)) ^ t
    return ((t ^ (t >>> 14)) >>> 0) / 4294967296
  }
}

const LETTERS = 'ABCDEFGHIJKLMNOPQRSTUVWXYZ'

interface Stroke {
  t: number
  kind: 0 | 1
  code: string
}

export function simulateSession(seed: number, index: number): string {
  const rand = mulberry32(seed + index * 7919)
  const prompt = rand() < 0.5 ? 'opinion-1' : 'fact-1'
  const startMs = 1_000_000 + index
  const session = new CaptureSession(prompt, `sim${index}`, true, startMs, `sim${seed}x${index}`)

  // Schedule down/up strokes on a virtual clock; holds may outlast the gap
  // to the next press, giving real key rollover once sorted by time.
  const strokes: Stroke[] = []
  let clock = startMs + 200 + rand() * 2500
  const press = (code: string, holdMs: number, gapMs: number) => {
    strokes.push({ t: clock, kind: 0, code })
    strokes.push({ t: clock + holdMs, kind: 1, code })
    clock += gapMs
  }

  const targetChars = 320 + Math.floor(rand() * 100)
  let typed = 0
  while (typed < targetChars) {
    const wordLen = 3 + Math.floor(rand() * 6)
    for (let i = 0; i < wordLen; i += 1) {
      press(`Key${LETTERS[Math.floor(rand() * 26)]}`, 40 + rand() * 160, 80 + rand() * 200)
      typed += 1
    }
    if (rand() < 0.15) {
      const runs = 1 + Math.floor(rand() * 2)
      for (let i = 0; i < runs; i += 1) press('Backspace', 30 + rand() * 60, 100 + rand() * 150)
      for (let i = 0; i < runs; i += 1) {
        press(`Key${LETTERS[Math.floor(rand() * 26)]}`, 40 + rand() * 160, 80 + rand() * 200)
        typed += 1
      }
    }
    press(rand() < 0.12 ? 'Period' : 'Space', 30 + rand() * 60, 150 + rand() * 700)
    typed += 1
  }

  strokes.sort((a, b) => a.t - b.t || a.kind - b.kind)
  for (const s of strokes) {
    if (s.kind === 0) session.recordDown(s.code, s.t)
    else session.recordUp(s.code, s.t)
  }
  session.stop()
  const condition = index % 2 === 0 ? 0 : 1
  return exportSession(session, condition as 0 | 1).text
}

function main(): void {
  const [outDir, countArg, seedArg] = process.argv.slice(2)
  if (!outDir) {
    console.error('usage: node dist/simulate.js <outDir> [count] [seed]')
    process.exit(2)
  }
  const count = countArg ? Number(countArg) : 25
  const seed = seedArg ? Number(seedArg) : 1
  mkdirSync(outDir, { recursive: true })
  for (let i = 0; i < count; i += 1) {
    const blob = simulateSession(seed, i)
    writeFileSync(join(outDir, `session${String(i).padStart(3, '0')}.kdi`), blob)
  }
  console.log(`wrote ${count} scripted session blob(s) to ${outDir}`)
}

if (process.argv[1] && fileURLToPath(import.meta.url) === resolve(process.argv[1])) {
  main()
}
